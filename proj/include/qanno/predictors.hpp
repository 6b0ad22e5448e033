#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qanno/label_model.hpp"

namespace qanno {

struct Point2D {
  double x1 = 0.0;
  double x2 = 0.0;

  bool operator==(const Point2D&) const = default;
};

/// Bayes posterior of the positive blob for two unit-covariance Gaussians
/// centered at (0,0) (label 0) and (2,2) (label 1) with equal priors.
double posterior_two_gaussians(Point2D p);

/// 1 / (1 + exp(-((x2 - x1) / 2) / 0.3)).
double sigmoid_predictor_b(Point2D p);

/// Linear classifier with a sigmoid link, trained by full-batch gradient
/// descent on
///   [ sum BCE(labeled) + incorrect-guess loss + l2/2 |w|^2 ] / m
/// where m counts labeled points plus one for a pending incorrect guess. The
/// bias is not regularized.
struct LogisticModel {
  double w1 = 0.0;
  double w2 = 0.0;
  double bias = 0.0;
  double learning_rate = 0.1;
  std::size_t epochs = 200;
  double l2 = 1.0;

  double logit(Point2D p) const { return w1 * p.x1 + w2 * p.x2 + bias; }
  /// Clamped probability of the positive class.
  double predict(Point2D p) const;
  ItemProbabilities predict_all(std::span<const Point2D> points) const;

  bool operator==(const LogisticModel&) const = default;
};

void to_json(nlohmann::json& j, const LogisticModel& m);
void from_json(const nlohmann::json& j, LogisticModel& m);

/// A guess known to contain at least one wrong pseudo-label.
struct IncorrectGuessExample {
  std::vector<Point2D> points;
  std::vector<std::uint8_t> pseudo_labels;
};

struct LogisticObjective {
  double loss = 0.0;
  std::array<double, 3> gradient{};  // d/dw1, d/dw2, d/dbias
};

/// Training objective and its analytic gradient. The incorrect-guess term is
/// -log(1 - prod_i c_i) with c_i the model's probability of pseudo-label i.
LogisticObjective logistic_objective(const LogisticModel& model, std::span<const Point2D> points,
                                     std::span<const std::uint8_t> labels,
                                     const IncorrectGuessExample* pending = nullptr);

/// Runs model.epochs gradient steps starting from `model`'s weights.
/// Throws std::invalid_argument with nothing to fit, LengthMismatch on
/// inconsistent inputs and DegenerateInput when all training points coincide.
LogisticModel train_logistic(std::span<const Point2D> points, std::span<const std::uint8_t> labels,
                             const std::optional<IncorrectGuessExample>& pending, const LogisticModel& model);

/// Contents of a probability file:
///   {"items": [{"id": 0, "p": 0.9, "payload": "..."}, ...], "labels": [1, 0, ...]}
/// "labels" and per-item "payload" are optional.
struct ProbabilityFile {
  ItemProbabilities probs;
  std::optional<Labeling> labels;
  std::vector<std::string> payloads;  // empty string when an item has none
};

/// Throws ParseError with line/column or field path diagnostics, RangeError
/// for probabilities outside [0, 1].
ProbabilityFile parse_probability_json(std::string_view text, std::string_view source = "<input>");
ProbabilityFile parse_probability_json(const nlohmann::json& doc);
ProbabilityFile load_probability_file(const std::filesystem::path& path);

nlohmann::json to_probability_json(const ItemProbabilities& probs, const std::optional<Labeling>& labels,
                                   std::span<const std::string> payloads = {});

}  // namespace qanno
