#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qanno/annotation_state.hpp"
#include "qanno/harness.hpp"
#include "qanno/predictors.hpp"
#include "qanno/questioner.hpp"

namespace qanno {

/// Environment variable naming the directory that holds session directories.
inline constexpr const char* kDataDirEnv = "QANNO_DATA_DIR";

class SessionNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A question is outstanding; `outstanding` is its question document.
class QuestionConflict : public std::runtime_error {
 public:
  QuestionConflict(const std::string& what, nlohmann::json outstanding)
      : std::runtime_error(what), outstanding(std::move(outstanding)) {}
  nlohmann::json outstanding;
};

/// Everything needed to start a session.
struct SessionSetup {
  ProbabilityFile dataset;
  /// Feature points; required when `retrain` is set.
  std::optional<std::vector<Point2D>> points;
  /// Train the logistic model from scratch on the answers (retrain_due cadence)
  /// instead of using the dataset probabilities.
  bool retrain = false;
  SearchConfig config;
  nlohmann::json source;  // echo of how the dataset was obtained
};

/// Request body of POST /sessions:
///   {"config": {...}?, "retrain": bool?, "dataset": <probability file>}
///   {"config": {...}?, "retrain": bool?, "synthetic": {"problem": "a", "seed": 0, "size": 10?}}
/// Throws ParseError / RangeError / std::invalid_argument on bad input.
SessionSetup parse_session_request(const nlohmann::json& body);

/// One persistent annotation session, stored in its own directory:
///   session.json   setup (immutable)
///   events.jsonl   append-only question/answer log, fsync'ed per event
///   snapshot.json  periodic state checkpoint
///
/// The event log is the source of truth: opening a session replays it,
/// re-running each search so the lookahead tree matches the one the live
/// session had. All public methods lock the session's mutex.
class Session {
 public:
  static std::shared_ptr<Session> create(const std::filesystem::path& root, const std::string& id,
                                         SessionSetup setup);
  static std::shared_ptr<Session> open(const std::filesystem::path& root, const std::string& id);

  const std::string& id() const { return id_; }

  /// {"status": "question", question_id, n, items: [{id, pseudo_label, payload}], predictor_version}
  /// or {"status": "complete", labels} once everything is labeled.
  /// Throws QuestionConflict while a question is outstanding.
  nlohmann::json next_question();

  /// Applies the annotator's answer to the outstanding question. Answers to
  /// an already answered question return the recorded response unchanged.
  nlohmann::json answer(std::uint64_t question_id, bool correct);

  /// {"curve": [{q, labeled, incorrect}...], "summary": curve metrics | null}
  nlohmann::json metrics(std::optional<std::size_t> target_l = std::nullopt) const;

  /// Full session document for GET /sessions/{id}.
  nlohmann::json describe() const;

  std::size_t event_count() const;

 private:
  struct Outstanding {
    std::uint64_t id = 0;
    Guess guess;
    std::uint64_t predictor_version = 0;
  };
  struct Transition;

  Session(std::filesystem::path dir, std::string id, SessionSetup setup);

  void replay();
  void replay_question(const nlohmann::json& event);
  void replay_answer(const nlohmann::json& event);
  Transition transition(const Guess& guess, bool correct) const;
  void commit(Transition t, const Guess& guess, bool correct);
  void append_event(const nlohmann::json& event);
  void write_snapshot() const;
  bool restore_snapshot(const std::vector<nlohmann::json>& events);
  nlohmann::json question_document(const Outstanding& q) const;
  nlohmann::json progress() const;
  nlohmann::json final_labels() const;

  std::filesystem::path dir_;
  std::string id_;
  SessionSetup setup_;

  AnnotationState state_;
  SearchTree tree_;
  ItemProbabilities probs_;
  LogisticModel model_;
  std::uint64_t predictor_version_ = 0;
  std::uint64_t next_question_id_ = 1;
  std::optional<Outstanding> outstanding_;
  std::map<std::uint64_t, nlohmann::json> responses_;
  std::vector<QuestionRecord> log_;
  std::vector<CurvePoint> curve_;
  std::size_t incorrect_ = 0;
  std::size_t events_ = 0;
  mutable std::mutex mutex_;
};

/// Directory of sessions with an in-memory cache of opened ones.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  /// $QANNO_DATA_DIR, or ./qanno-data when unset.
  static std::filesystem::path default_root();

  const std::filesystem::path& root() const { return root_; }

  /// Validates the request and persists a new session; returns its id.
  std::string create(const nlohmann::json& body);

  /// Throws SessionNotFound for malformed or unknown ids.
  std::shared_ptr<Session> get(const std::string& id);

 private:
  std::filesystem::path root_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> open_;
};

}  // namespace qanno
