#include "qanno/session.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "qanno/error.hpp"
#include "qanno/json_util.hpp"
#include "qanno/synthetic.hpp"

namespace qanno {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kSnapshotEvery = 16;  // answers between snapshots
constexpr std::size_t kMaxSyntheticSessionSize = 100000;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

[[noreturn]] void throw_errno(const std::string& what, const fs::path& path) {
  throw std::runtime_error(what + " " + path.string() + ": " + std::strerror(errno));
}

void write_all(int fd, const std::string& data, const fs::path& path) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw_errno("cannot write", path);
    }
    done += static_cast<std::size_t>(n);
  }
}

void append_durably(const fs::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("cannot open", path);
  write_all(fd, line, path);
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw_errno("cannot fsync", path);
  }
  ::close(fd);
}

// Write to a temporary sibling, fsync, then rename over the target.
void replace_durably(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("cannot open", tmp);
  write_all(fd, text, tmp);
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw_errno("cannot fsync", tmp);
  }
  ::close(fd);
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (const char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
  }
  return true;
}

std::vector<Point2D> parse_points(const json& j, std::size_t expected) {
  if (!j.is_array()) throw ParseError("points: expected an array of [x1, x2] pairs");
  if (j.size() != expected) {
    throw ParseError("points: expected " + std::to_string(expected) + " entries, got " + std::to_string(j.size()));
  }
  std::vector<Point2D> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const json& p = j[k];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw ParseError("points[" + std::to_string(k) + "]: expected [x1, x2]");
    }
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

json points_json(const std::vector<Point2D>& points) {
  json out = json::array();
  for (const Point2D& p : points) out.push_back({p.x1, p.x2});
  return out;
}

std::vector<std::pair<std::size_t, std::uint8_t>> newly_labeled(const AnnotationState& before,
                                                                const AnnotationState& after) {
  std::vector<std::pair<std::size_t, std::uint8_t>> out;
  for (const auto& [i, label] : after.labeled()) {
    if (!before.is_labeled(i)) out.emplace_back(i, label);
  }
  return out;
}

}  // namespace

SessionSetup parse_session_request(const json& body) {
  if (!body.is_object()) throw ParseError("request body must be a JSON object");
  for (const auto& [key, _] : body.items()) {
    if (key != "config" && key != "retrain" && key != "dataset" && key != "synthetic" && key != "points") {
      throw ParseError("unknown field '" + key + "'");
    }
  }
  SessionSetup setup;
  if (body.contains("config")) {
    try {
      setup.config = body.at("config").get<SearchConfig>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("config: ") + e.what());
    }
  }
  setup.config.validate();
  if (body.contains("retrain")) {
    if (!body.at("retrain").is_boolean()) throw ParseError("retrain: expected a boolean");
    setup.retrain = body.at("retrain").get<bool>();
  }

  const bool has_dataset = body.contains("dataset");
  const bool has_synthetic = body.contains("synthetic");
  if (has_dataset == has_synthetic) throw ParseError("exactly one of 'dataset' or 'synthetic' is required");

  if (has_synthetic) {
    const json& syn = body.at("synthetic");
    if (!syn.is_object()) throw ParseError("synthetic: expected an object");
    if (!syn.contains("problem") || !syn.at("problem").is_string()) {
      throw ParseError("synthetic.problem: expected \"a\", \"b\" or \"c\"");
    }
    const Problem problem = parse_problem(syn.at("problem").get<std::string>());
    std::uint64_t seed = 0;
    if (syn.contains("seed")) {
      if (!is_non_negative_integer(syn.at("seed"))) throw ParseError("synthetic.seed: expected a non-negative integer");
      seed = syn.at("seed").get<std::uint64_t>();
    }
    std::size_t size = kSyntheticSize;
    if (syn.contains("size")) {
      if (!is_non_negative_integer(syn.at("size"))) throw ParseError("synthetic.size: expected a positive even integer");
      size = syn.at("size").get<std::size_t>();
      if (size > kMaxSyntheticSessionSize) throw RangeError("synthetic.size: at most 100000 items");
    }
    const SyntheticInstance inst = generate(problem, seed, size);
    std::vector<std::string> payloads;
    for (const Point2D& p : inst.points) {
      std::ostringstream s;
      s << std::setprecision(4) << "(" << p.x1 << ", " << p.x2 << ")";
      payloads.push_back(s.str());
    }
    setup.dataset.probs = inst.probs;
    setup.dataset.labels = inst.labels;
    setup.dataset.payloads = std::move(payloads);
    setup.points = inst.points;
    setup.source = {{"synthetic", {{"problem", to_string(problem)}, {"seed", seed}, {"size", size}}}};
  } else {
    setup.dataset = parse_probability_json(body.at("dataset"));
    setup.source = {{"dataset", {{"items", setup.dataset.probs.size()}}}};
  }
  if (body.contains("points")) setup.points = parse_points(body.at("points"), setup.dataset.probs.size());
  if (setup.retrain && !setup.points) {
    throw std::invalid_argument("retrain: needs feature points (a synthetic dataset or a 'points' array)");
  }
  return setup;
}

struct Session::Transition {
  AnnotationState state;
  std::vector<std::pair<std::size_t, std::uint8_t>> committed;
  ItemProbabilities probs;
  LogisticModel model;
  std::uint64_t predictor_version = 0;
  bool retrained = false;
};

Session::Session(fs::path dir, std::string id, SessionSetup setup)
    : dir_(std::move(dir)),
      id_(std::move(id)),
      setup_(std::move(setup)),
      state_(setup_.dataset.probs.size()),
      tree_(state_),
      probs_(setup_.dataset.probs) {
  if (setup_.retrain) probs_ = model_.predict_all(*setup_.points);
  curve_.push_back({0, 0, 0});
}

std::shared_ptr<Session> Session::create(const fs::path& root, const std::string& id, SessionSetup setup) {
  if (!valid_session_id(id)) throw std::invalid_argument("invalid session id '" + id + "'");
  const fs::path dir = root / id;
  if (fs::exists(dir)) throw std::runtime_error("session directory already exists: " + dir.string());
  fs::create_directories(dir);

  json doc{{"id", id},
           {"created_at", utc_now()},
           {"config", setup.config},
           {"retrain", setup.retrain},
           {"source", setup.source},
           {"dataset", to_probability_json(setup.dataset.probs, setup.dataset.labels, setup.dataset.payloads)}};
  if (setup.points) doc["points"] = points_json(*setup.points);
  replace_durably(dir / "session.json", doc.dump(2) + "\n");
  append_durably(dir / "events.jsonl", "");
  return std::shared_ptr<Session>(new Session(dir, id, std::move(setup)));
}

std::shared_ptr<Session> Session::open(const fs::path& root, const std::string& id) {
  if (!valid_session_id(id)) throw SessionNotFound("unknown session '" + id + "'");
  const fs::path dir = root / id;
  if (!fs::exists(dir / "session.json")) throw SessionNotFound("unknown session '" + id + "'");
  const json doc = json::parse(read_file(dir / "session.json"));

  SessionSetup setup;
  setup.config = doc.at("config").get<SearchConfig>();
  setup.retrain = doc.at("retrain").get<bool>();
  setup.source = doc.at("source");
  setup.dataset = parse_probability_json(doc.at("dataset"));
  if (doc.contains("points")) setup.points = parse_points(doc.at("points"), setup.dataset.probs.size());

  auto session = std::shared_ptr<Session>(new Session(dir, id, std::move(setup)));
  session->replay();
  return session;
}

void Session::replay() {
  const fs::path log = dir_ / "events.jsonl";
  std::vector<json> events;
  if (fs::exists(log)) {
    const std::string text = read_file(log);
    std::size_t pos = 0;
    std::size_t good_end = 0;
    while (pos < text.size()) {
      const std::size_t nl = text.find('\n', pos);
      if (nl == std::string::npos) break;  // torn final write
      const std::string line = text.substr(pos, nl - pos);
      pos = nl + 1;
      if (line.empty()) {
        good_end = pos;
        continue;
      }
      try {
        events.push_back(json::parse(line));
      } catch (const json::parse_error&) {
        break;
      }
      good_end = pos;
    }
    if (good_end < text.size()) {
      std::cerr << "session " << id_ << ": dropping " << (text.size() - good_end)
                << " bytes of incomplete event log\n";
      fs::resize_file(log, good_end);
    }
  }

  std::size_t start = 0;
  if (restore_snapshot(events)) start = events_;
  for (std::size_t k = 0; k < events.size(); ++k) {
    const json& e = events[k];
    const std::string type = e.at("type").get<std::string>();
    if (type == "answer") responses_[e.at("question_id").get<std::uint64_t>()] = e.at("response");
    if (k < start) continue;
    if (type == "question") {
      replay_question(e);
    } else if (type == "answer") {
      replay_answer(e);
    } else {
      throw std::runtime_error("session " + id_ + ": unknown event type '" + type + "'");
    }
    events_ = k + 1;
  }
}

bool Session::restore_snapshot(const std::vector<json>& events) {
  // Tree-reusing sessions replay every search so the tree is rebuilt exactly.
  if (!setup_.config.reset_tree) return false;
  const fs::path path = dir_ / "snapshot.json";
  if (!fs::exists(path)) return false;
  try {
    const json snap = json::parse(read_file(path));
    const std::size_t count = snap.at("event_count").get<std::size_t>();
    if (count > events.size()) return false;
    state_ = snap.at("state").get<AnnotationState>();
    if (state_.item_count() != setup_.dataset.probs.size()) return false;
    model_ = snap.at("model").get<LogisticModel>();
    predictor_version_ = snap.at("predictor_version").get<std::uint64_t>();
    next_question_id_ = snap.at("next_question_id").get<std::uint64_t>();
    incorrect_ = snap.at("incorrect").get<std::size_t>();
    curve_.clear();
    for (const json& p : snap.at("curve")) {
      curve_.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>(), p.at(2).get<std::size_t>()});
    }
    log_.clear();
    for (const json& q : snap.at("questions")) log_.push_back({q.at(0).get<std::size_t>(), q.at(1).get<bool>()});
    probs_ = setup_.retrain ? model_.predict_all(*setup_.points) : setup_.dataset.probs;
    tree_ = SearchTree(state_);
    events_ = count;
    return true;
  } catch (const std::exception& e) {
    std::cerr << "session " << id_ << ": ignoring unreadable snapshot: " << e.what() << "\n";
    state_ = AnnotationState(setup_.dataset.probs.size());
    model_ = LogisticModel{};
    predictor_version_ = 0;
    next_question_id_ = 1;
    incorrect_ = 0;
    curve_ = {{0, 0, 0}};
    log_.clear();
    probs_ = setup_.retrain ? model_.predict_all(*setup_.points) : setup_.dataset.probs;
    tree_ = SearchTree(state_);
    events_ = 0;
    return false;
  }
}

void Session::write_snapshot() const {
  json curve = json::array();
  for (const CurvePoint& p : curve_) curve.push_back({p.questions, p.labeled, p.incorrect});
  json questions = json::array();
  for (const QuestionRecord& q : log_) questions.push_back({q.size, q.correct});
  const json snap{{"event_count", events_},
                  {"state", state_},
                  {"model", model_},
                  {"predictor_version", predictor_version_},
                  {"next_question_id", next_question_id_},
                  {"incorrect", incorrect_},
                  {"curve", std::move(curve)},
                  {"questions", std::move(questions)}};
  replace_durably(dir_ / "snapshot.json", snap.dump() + "\n");
}

void Session::replay_question(const json& event) {
  const auto qid = event.at("question_id").get<std::uint64_t>();
  const Guess logged = event.at("guess").get<Guess>();
  if (outstanding_ || state_.is_terminal() || qid != next_question_id_) {
    throw std::runtime_error("session " + id_ + ": event log out of order at question " + std::to_string(qid));
  }
  const Guess recomputed = best_action(tree_, probs_, setup_.config);
  if (recomputed != logged) {
    std::cerr << "session " << id_ << ": question " << qid
              << " differs from the engine's choice on replay; keeping the logged question\n";
  }
  outstanding_ = Outstanding{qid, logged, event.at("predictor_version").get<std::uint64_t>()};
  next_question_id_ = qid + 1;
}

void Session::replay_answer(const json& event) {
  const auto qid = event.at("question_id").get<std::uint64_t>();
  if (!outstanding_ || outstanding_->id != qid) {
    throw std::runtime_error("session " + id_ + ": answer to question " + std::to_string(qid) +
                             " without a matching question");
  }
  const Guess guess = outstanding_->guess;
  const bool correct = event.at("correct").get<bool>();
  commit(transition(guess, correct), guess, correct);
}

Session::Transition Session::transition(const Guess& guess, bool correct) const {
  Transition t;
  t.state = apply_answer(state_, guess, correct);
  t.committed = newly_labeled(state_, t.state);
  t.probs = probs_;
  t.model = model_;
  t.predictor_version = predictor_version_;
  const std::size_t questions = log_.size() + 1;
  if (setup_.retrain && !t.state.is_terminal() && retrain_due(questions)) {
    std::vector<Point2D> pts;
    std::vector<std::uint8_t> labels;
    for (const auto& [i, label] : t.state.labeled()) {
      pts.push_back((*setup_.points)[i]);
      labels.push_back(label);
    }
    std::optional<IncorrectGuessExample> pending;
    if (const auto& g = t.state.pending_incorrect()) {
      IncorrectGuessExample ex;
      for (std::size_t k = 0; k < g->size(); ++k) {
        ex.points.push_back((*setup_.points)[g->indices[k]]);
        ex.pseudo_labels.push_back(g->labels[k]);
      }
      pending = std::move(ex);
    }
    try {
      t.model = train_logistic(pts, labels, pending, model_);
      t.probs = t.model.predict_all(*setup_.points);
      t.predictor_version = predictor_version_ + 1;
      t.retrained = true;
    } catch (const DegenerateInput&) {
      // Nothing to learn from yet; keep the current predictor.
    }
  }
  return t;
}

void Session::commit(Transition t, const Guess& guess, bool correct) {
  AnnotationState next_state = t.state;
  try {
    tree_ = advance(std::move(tree_), guess, correct, setup_.config);
  } catch (const InvalidGuess&) {
    tree_ = SearchTree(next_state);
  }
  state_ = std::move(next_state);
  probs_ = std::move(t.probs);
  model_ = t.model;
  predictor_version_ = t.predictor_version;
  log_.push_back({guess.size(), correct});
  if (!correct) ++incorrect_;
  curve_.push_back({log_.size(), state_.labeled_count(), incorrect_});
  outstanding_.reset();
}

void Session::append_event(const json& event) {
  append_durably(dir_ / "events.jsonl", event.dump() + "\n");
  ++events_;
}

json Session::question_document(const Outstanding& q) const {
  json items = json::array();
  for (std::size_t k = 0; k < q.guess.size(); ++k) {
    const std::size_t i = q.guess.indices[k];
    json item{{"id", i}, {"pseudo_label", q.guess.labels[k]}};
    if (i < setup_.dataset.payloads.size() && !setup_.dataset.payloads[i].empty()) {
      item["payload"] = setup_.dataset.payloads[i];
    }
    items.push_back(std::move(item));
  }
  return json{{"status", "question"},
              {"question_id", q.id},
              {"n", q.guess.size()},
              {"items", std::move(items)},
              {"predictor_version", q.predictor_version}};
}

json Session::progress() const {
  return json{{"labeled", state_.labeled_count()},
              {"total", state_.item_count()},
              {"questions", log_.size()},
              {"incorrect", incorrect_}};
}

json Session::final_labels() const {
  std::vector<int> labels(state_.item_count(), 0);
  for (const auto& [i, label] : state_.labeled()) labels[i] = label;
  return labels;
}

json Session::next_question() {
  std::lock_guard lock(mutex_);
  if (outstanding_) {
    throw QuestionConflict("question " + std::to_string(outstanding_->id) + " is still unanswered",
                           question_document(*outstanding_));
  }
  if (state_.is_terminal()) {
    return json{{"status", "complete"}, {"labels", final_labels()}, {"progress", progress()}};
  }
  const Guess guess = best_action(tree_, probs_, setup_.config);
  Outstanding q{next_question_id_, guess, predictor_version_};
  append_event({{"type", "question"},
                {"question_id", q.id},
                {"guess", q.guess},
                {"predictor_version", q.predictor_version},
                {"time", utc_now()}});
  outstanding_ = q;
  ++next_question_id_;
  return question_document(q);
}

json Session::answer(std::uint64_t question_id, bool correct) {
  std::lock_guard lock(mutex_);
  if (const auto it = responses_.find(question_id); it != responses_.end()) return it->second;
  if (!outstanding_) {
    throw std::invalid_argument("question " + std::to_string(question_id) + " was never issued");
  }
  if (outstanding_->id != question_id) {
    throw QuestionConflict("question " + std::to_string(question_id) + " is not the outstanding question",
                           question_document(*outstanding_));
  }
  const Guess guess = outstanding_->guess;
  Transition t = transition(guess, correct);

  json committed = json::array();
  for (const auto& [i, label] : t.committed) committed.push_back({{"id", i}, {"label", label}});
  json response{{"question_id", question_id},
                {"correct", correct},
                {"committed", std::move(committed)},
                {"progress",
                 {{"labeled", t.state.labeled_count()},
                  {"total", t.state.item_count()},
                  {"questions", log_.size() + 1},
                  {"incorrect", incorrect_ + (correct ? 0 : 1)}}},
                {"complete", t.state.is_terminal()},
                {"predictor_version", t.predictor_version}};
  append_event({{"type", "answer"},
                {"question_id", question_id},
                {"correct", correct},
                {"response", response},
                {"time", utc_now()}});
  responses_[question_id] = response;
  commit(std::move(t), guess, correct);
  if (setup_.config.reset_tree && (log_.size() % kSnapshotEvery == 0 || state_.is_terminal())) {
    try {
      write_snapshot();
    } catch (const std::exception& e) {
      std::cerr << "session " << id_ << ": snapshot failed: " << e.what() << "\n";
    }
  }
  return response;
}

json Session::metrics(std::optional<std::size_t> target_l) const {
  std::lock_guard lock(mutex_);
  json curve = json::array();
  for (const CurvePoint& p : curve_) {
    curve.push_back({{"q", p.questions}, {"labeled", p.labeled}, {"incorrect", p.incorrect}});
  }
  json summary = nullptr;
  if (!log_.empty()) {
    RunRecord record;
    record.item_count = state_.item_count();
    record.question_log = log_;
    record.total_questions = log_.size();
    record.curve = curve_;
    record.max_questions = log_.size();
    summary = curve_metrics(record, target_l.value_or(state_.item_count()));
  }
  return json{{"curve", std::move(curve)}, {"summary", std::move(summary)}, {"progress", progress()}};
}

json Session::describe() const {
  std::lock_guard lock(mutex_);
  json items = json::array();
  for (std::size_t i = 0; i < setup_.dataset.probs.size(); ++i) {
    json item{{"id", i}};
    if (i < setup_.dataset.payloads.size() && !setup_.dataset.payloads[i].empty()) {
      item["payload"] = setup_.dataset.payloads[i];
    }
    items.push_back(std::move(item));
  }
  return json{{"id", id_},
              {"config", setup_.config},
              {"retrain", setup_.retrain},
              {"source", setup_.source},
              {"items", std::move(items)},
              {"state", state_},
              {"progress", progress()},
              {"outstanding", outstanding_ ? question_document(*outstanding_) : json(nullptr)},
              {"predictor_version", predictor_version_},
              {"complete", state_.is_terminal()},
              {"labels", state_.is_terminal() ? final_labels() : json(nullptr)}};
}

std::size_t Session::event_count() const {
  std::lock_guard lock(mutex_);
  return events_;
}

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path SessionStore::default_root() {
  if (const char* env = std::getenv(kDataDirEnv); env != nullptr && *env != '\0') return env;
  return fs::current_path() / "qanno-data";
}

std::string SessionStore::create(const json& body) {
  SessionSetup setup = parse_session_request(body);
  static thread_local std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(mutex_);
  std::string id;
  do {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << gen();
    id = s.str();
  } while (fs::exists(root_ / id));
  open_[id] = Session::create(root_, id, std::move(setup));
  return id;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) {
  std::lock_guard lock(mutex_);
  if (const auto it = open_.find(id); it != open_.end()) return it->second;
  auto session = Session::open(root_, id);
  open_[id] = session;
  return session;
}

}  // namespace qanno
