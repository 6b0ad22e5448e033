#include "qanno/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qanno/error.hpp"

namespace qanno {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double posterior_two_gaussians(Point2D p) {
  const double d0 = p.x1 * p.x1 + p.x2 * p.x2;
  const double d1 = (p.x1 - 2.0) * (p.x1 - 2.0) + (p.x2 - 2.0) * (p.x2 - 2.0);
  return clamp_probability(sigmoid((d0 - d1) / 2.0));
}

double sigmoid_predictor_b(Point2D p) { return clamp_probability(sigmoid(((p.x2 - p.x1) / 2.0) / 0.3)); }

double LogisticModel::predict(Point2D p) const { return clamp_probability(sigmoid(logit(p))); }

ItemProbabilities LogisticModel::predict_all(std::span<const Point2D> points) const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const Point2D& p : points) out.push_back(predict(p));
  return ItemProbabilities(std::move(out));
}

void to_json(nlohmann::json& j, const LogisticModel& m) {
  j = nlohmann::json{{"w1", m.w1},       {"w2", m.w2}, {"bias", m.bias}, {"learning_rate", m.learning_rate},
                     {"epochs", m.epochs}, {"l2", m.l2}};
}

void from_json(const nlohmann::json& j, LogisticModel& m) {
  m.w1 = j.at("w1").get<double>();
  m.w2 = j.at("w2").get<double>();
  m.bias = j.at("bias").get<double>();
  m.learning_rate = j.value("learning_rate", 0.1);
  m.epochs = j.value("epochs", std::size_t{200});
  m.l2 = j.value("l2", 1.0);
}

LogisticObjective logistic_objective(const LogisticModel& model, std::span<const Point2D> points,
                                     std::span<const std::uint8_t> labels, const IncorrectGuessExample* pending) {
  if (points.size() != labels.size()) throw LengthMismatch("points and labels differ in length");
  LogisticObjective out;
  double& loss = out.loss;
  auto& g = out.gradient;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double z = model.logit(points[i]);
    loss += softplus(z) - labels[i] * z;
    const double r = sigmoid(z) - labels[i];
    g[0] += r * points[i].x1;
    g[1] += r * points[i].x2;
    g[2] += r;
  }
  std::size_t terms = points.size();
  if (pending != nullptr && !pending->points.empty()) {
    if (pending->points.size() != pending->pseudo_labels.size()) {
      throw LengthMismatch("incorrect guess points and pseudo-labels differ in length");
    }
    // log P(all pseudo-labels right) = sum_i log c_i
    double log_ok = 0.0;
    for (std::size_t i = 0; i < pending->points.size(); ++i) {
      const double z = model.logit(pending->points[i]);
      log_ok += pending->pseudo_labels[i] ? -softplus(-z) : -softplus(z);
    }
    log_ok = std::min(log_ok, -1e-300);
    loss += -std::log(-std::expm1(log_ok));
    const double odds = 1.0 / std::expm1(-log_ok);  // P / (1 - P)
    for (std::size_t i = 0; i < pending->points.size(); ++i) {
      const double z = model.logit(pending->points[i]);
      const double r = odds * (pending->pseudo_labels[i] - sigmoid(z));
      g[0] += r * pending->points[i].x1;
      g[1] += r * pending->points[i].x2;
      g[2] += r;
    }
    ++terms;
  }
  loss += 0.5 * model.l2 * (model.w1 * model.w1 + model.w2 * model.w2);
  g[0] += model.l2 * model.w1;
  g[1] += model.l2 * model.w2;
  const double scale = terms > 0 ? 1.0 / static_cast<double>(terms) : 1.0;
  loss *= scale;
  for (double& x : g) x *= scale;
  return out;
}

LogisticModel train_logistic(std::span<const Point2D> points, std::span<const std::uint8_t> labels,
                             const std::optional<IncorrectGuessExample>& pending, const LogisticModel& model) {
  if (points.size() != labels.size()) throw LengthMismatch("points and labels differ in length");
  const bool has_pending = pending && !pending->points.empty();
  if (points.empty() && !has_pending) {
    throw std::invalid_argument("train_logistic needs a labeled point or a pending incorrect guess");
  }
  std::vector<Point2D> all(points.begin(), points.end());
  if (has_pending) all.insert(all.end(), pending->points.begin(), pending->points.end());
  if (all.size() >= 2 && std::all_of(all.begin(), all.end(), [&](const Point2D& p) { return p == all.front(); })) {
    throw DegenerateInput("all training points are identical");
  }

  LogisticModel m = model;
  const IncorrectGuessExample* pend = has_pending ? &*pending : nullptr;
  for (std::size_t epoch = 0; epoch < m.epochs; ++epoch) {
    const LogisticObjective obj = logistic_objective(m, points, labels, pend);
    m.w1 -= m.learning_rate * obj.gradient[0];
    m.w2 -= m.learning_rate * obj.gradient[1];
    m.bias -= m.learning_rate * obj.gradient[2];
    if (!std::isfinite(m.w1) || !std::isfinite(m.w2) || !std::isfinite(m.bias)) {
      throw std::runtime_error("train_logistic diverged to non-finite weights");
    }
  }
  return m;
}

namespace {

std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  throw ParseError(path + ": " + what);
}

}  // namespace

ProbabilityFile parse_probability_json(const nlohmann::json& doc) {
  if (!doc.is_object()) field_error("$", "expected a JSON object");
  if (!doc.contains("items")) field_error("$", "missing required field 'items'");
  const auto& items = doc.at("items");
  if (!items.is_array()) field_error("items", "expected an array");
  if (items.empty()) field_error("items", "dataset must contain at least one item");

  std::vector<double> probs;
  std::vector<std::string> payloads;
  probs.reserve(items.size());
  for (std::size_t k = 0; k < items.size(); ++k) {
    const std::string path = "items[" + std::to_string(k) + "]";
    const auto& item = items[k];
    if (!item.is_object()) field_error(path, "expected an object");
    if (!item.contains("id") || !item.at("id").is_number_integer()) field_error(path + ".id", "expected an integer");
    if (item.at("id").get<std::int64_t>() != static_cast<std::int64_t>(k)) {
      field_error(path + ".id", "ids must be 0..N-1 in increasing order, expected " + std::to_string(k));
    }
    if (!item.contains("p") || !item.at("p").is_number()) field_error(path + ".p", "expected a number");
    const double p = item.at("p").get<double>();
    if (!(p >= 0.0 && p <= 1.0)) {
      throw RangeError(path + ".p: probability " + std::to_string(p) + " outside [0, 1]");
    }
    probs.push_back(p);
    std::string payload;
    if (item.contains("payload") && !item.at("payload").is_null()) {
      if (!item.at("payload").is_string()) field_error(path + ".payload", "expected a string");
      payload = item.at("payload").get<std::string>();
    }
    payloads.push_back(std::move(payload));
  }

  ProbabilityFile out;
  out.probs = ItemProbabilities(std::move(probs));
  out.payloads = std::move(payloads);
  if (doc.contains("labels") && !doc.at("labels").is_null()) {
    const auto& labels = doc.at("labels");
    if (!labels.is_array()) field_error("labels", "expected an array");
    if (labels.size() != out.probs.size()) {
      field_error("labels", "expected " + std::to_string(out.probs.size()) + " entries, got " +
                                std::to_string(labels.size()));
    }
    std::vector<std::uint8_t> bits;
    for (std::size_t k = 0; k < labels.size(); ++k) {
      if (!labels[k].is_number_integer() || (labels[k].get<int>() != 0 && labels[k].get<int>() != 1)) {
        field_error("labels[" + std::to_string(k) + "]", "expected 0 or 1");
      }
      bits.push_back(static_cast<std::uint8_t>(labels[k].get<int>()));
    }
    out.labels = Labeling(std::move(bits));
  }
  return out;
}

ProbabilityFile parse_probability_json(std::string_view text, std::string_view source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string(source) + ": malformed JSON at " + line_col(text, e.byte > 0 ? e.byte - 1 : 0) +
                     ": " + e.what());
  }
  try {
    return parse_probability_json(doc);
  } catch (const ParseError& e) {
    throw ParseError(std::string(source) + ": " + e.what());
  }
}

ProbabilityFile load_probability_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open probability file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_probability_json(buf.str(), path.string());
}

nlohmann::json to_probability_json(const ItemProbabilities& probs, const std::optional<Labeling>& labels,
                                   std::span<const std::string> payloads) {
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    nlohmann::json item{{"id", i}, {"p", probs[i]}};
    if (i < payloads.size() && !payloads[i].empty()) item["payload"] = payloads[i];
    items.push_back(std::move(item));
  }
  nlohmann::json doc{{"items", std::move(items)}};
  if (labels) doc["labels"] = labels->bits;
  return doc;
}

}  // namespace qanno
