#include "qanno/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace qanno {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  return static_cast<std::size_t>(uniform() * static_cast<double>(n));
}

std::string to_string(Problem p) {
  switch (p) {
    case Problem::a: return "a";
    case Problem::b: return "b";
    case Problem::c: return "c";
  }
  return "?";
}

Problem parse_problem(const std::string& s) {
  if (s == "a") return Problem::a;
  if (s == "b") return Problem::b;
  if (s == "c") return Problem::c;
  throw std::invalid_argument("problem must be a, b or c, got '" + s + "'");
}

namespace {

std::size_t per_class(std::size_t size) {
  if (size == 0 || size % 2 != 0) {
    throw std::invalid_argument("synthetic size must be even and positive, got " + std::to_string(size));
  }
  return size / 2;
}

}  // namespace

SyntheticInstance gen_problem_a(std::uint64_t seed, std::size_t size) {
  const std::size_t half = per_class(size);
  Rng rng(seed);
  SyntheticInstance inst;
  inst.problem = Problem::a;
  inst.seed = seed;
  std::vector<std::uint8_t> labels;
  std::vector<double> probs;
  for (std::uint8_t cls = 0; cls < 2; ++cls) {
    const double center = cls ? 2.0 : 0.0;
    for (std::size_t k = 0; k < half; ++k) {
      const double x1 = center + rng.normal();
      const double x2 = center + rng.normal();
      inst.points.push_back({x1, x2});
      labels.push_back(cls);
      probs.push_back(posterior_two_gaussians(inst.points.back()));
    }
  }
  inst.labels = Labeling(std::move(labels));
  inst.probs = ItemProbabilities(std::move(probs));
  return inst;
}

SyntheticInstance gen_problem_b(std::uint64_t seed, std::size_t size) {
  const std::size_t half = per_class(size);
  Rng rng(seed);
  SyntheticInstance inst;
  inst.problem = Problem::b;
  inst.seed = seed;
  // Unit variance per coordinate; an I/2 covariance leaves the mean entropy near 7.3.
  const double sd = 1.0;
  std::vector<std::uint8_t> labels;
  std::vector<double> probs;
  for (int blob = 0; blob < 2; ++blob) {
    const double center = blob ? 3.0 : 0.0;
    for (std::size_t k = 0; k < half; ++k) {
      const double x1 = center + sd * rng.normal();
      const double x2 = center + sd * rng.normal();
      inst.points.push_back({x1, x2});
    }
  }
  for (const Point2D& p : inst.points) {
    const double q = sigmoid_predictor_b(p);
    probs.push_back(q);
    labels.push_back(rng.bernoulli(q) ? 1 : 0);
  }
  inst.labels = Labeling(std::move(labels));
  inst.probs = ItemProbabilities(std::move(probs));
  return inst;
}

SyntheticInstance gen_problem_c(std::uint64_t seed, std::size_t size) {
  const std::size_t half = per_class(size);
  Rng rng(seed);
  SyntheticInstance inst;
  inst.problem = Problem::c;
  inst.seed = seed;
  std::vector<std::uint8_t> labels;
  for (std::uint8_t cls = 0; cls < 2; ++cls) {
    const double center = cls ? 1.0 : -1.0;
    const double scale = 2.0 * rng.uniform() - 1.0;
    for (std::size_t k = 0; k < half; ++k) {
      inst.points.push_back({center + scale * rng.normal(), 0.0});
      labels.push_back(cls);
    }
  }
  for (Point2D& p : inst.points) p.x2 = rng.normal();
  for (auto& label : labels) {
    if (rng.bernoulli(0.2)) {
      ++inst.noisy_label_count;
      label = rng.bernoulli(0.5) ? 1 : 0;
    }
  }
  inst.labels = Labeling(std::move(labels));
  const LogisticModel fitted = train_logistic(inst.points, inst.labels.bits, std::nullopt, LogisticModel{});
  inst.probs = fitted.predict_all(inst.points);
  return inst;
}

SyntheticInstance generate(Problem problem, std::uint64_t seed, std::size_t size) {
  switch (problem) {
    case Problem::a: return gen_problem_a(seed, size);
    case Problem::b: return gen_problem_b(seed, size);
    case Problem::c: return gen_problem_c(seed, size);
  }
  throw std::invalid_argument("unknown problem");
}

void export_instance(const SyntheticInstance& inst, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string stem = "problem_" + to_string(inst.problem) + "_seed_" + std::to_string(inst.seed);
  std::vector<std::string> payloads;
  for (const Point2D& p : inst.points) {
    std::ostringstream s;
    s << std::setprecision(6) << "(" << p.x1 << ", " << p.x2 << ")";
    payloads.push_back(s.str());
  }
  {
    std::ofstream out(dir / (stem + ".json"));
    if (!out) throw std::runtime_error("cannot write " + (dir / (stem + ".json")).string());
    out << to_probability_json(inst.probs, inst.labels, payloads).dump(2) << "\n";
  }
  std::ofstream csv(dir / (stem + "_points.csv"));
  if (!csv) throw std::runtime_error("cannot write " + (dir / (stem + "_points.csv")).string());
  csv << "id,x1,x2,label,p\n" << std::setprecision(17);
  for (std::size_t i = 0; i < inst.points.size(); ++i) {
    csv << i << ',' << inst.points[i].x1 << ',' << inst.points[i].x2 << ',' << int{inst.labels[i]} << ','
        << inst.probs[i] << '\n';
  }
}

}  // namespace qanno
