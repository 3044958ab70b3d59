#include "failopt/detect/linear.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <tuple>

#include <nlohmann/json.hpp>

#include "failopt/error.hpp"
#include "failopt/rng.hpp"

namespace failopt::detect {
namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// |e| - 1 and the sign of an encoded entry, without branches.
inline std::size_t slot(std::int32_t e) {
  const std::int32_t m = e >> 31;
  return static_cast<std::size_t>((e ^ m) - m) - 1;
}
inline double sign_of(std::int32_t e) { return static_cast<double>(1 | (e >> 31)); }

double sparse_dot(const FeatureVector& x, const std::vector<double>& w) {
  double s = 0.0;
  for (const auto e : x.entries) s += sign_of(e) * w[slot(e)];
  return s;
}

void validate_dim(std::size_t dim) {
  if (dim < (std::size_t{1} << 12) || (dim & (dim - 1)) != 0 || dim > (std::size_t{1} << 30)) {
    throw Error(Errc::Config, "feature dimension must be a power of two in [2^12, 2^30]");
  }
}

}  // namespace

FeatureVector featurize(std::string_view text, int n_lo, int n_hi, std::size_t dim) {
  if (n_lo < 1 || n_hi < n_lo) throw Error(Errc::Config, "bad n-gram range");
  validate_dim(dim);
  std::vector<std::uint64_t> hashes;
  for (int n = n_lo; n <= n_hi; ++n) {
    const auto len = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + len <= text.size(); ++i) hashes.push_back(fnv1a64(text.substr(i, len)));
  }
  std::sort(hashes.begin(), hashes.end());
  hashes.erase(std::unique(hashes.begin(), hashes.end()), hashes.end());

  std::vector<std::pair<std::uint32_t, int>> signed_idx;
  signed_idx.reserve(hashes.size());
  for (const auto h : hashes) {
    signed_idx.emplace_back(static_cast<std::uint32_t>(h & (dim - 1)), (h >> 63) ? -1 : 1);
  }
  std::sort(signed_idx.begin(), signed_idx.end());
  FeatureVector out;
  for (std::size_t i = 0; i < signed_idx.size();) {
    const auto idx = signed_idx[i].first;
    int sum = 0;
    for (; i < signed_idx.size() && signed_idx[i].first == idx; ++i) sum += signed_idx[i].second;
    if (sum != 0) {
      const auto code = static_cast<std::int32_t>(idx) + 1;
      out.entries.push_back(sum > 0 ? code : -code);
    }
  }
  return out;
}

double LinearNgramModel::logit(const FeatureVector& x) const { return sparse_dot(x, weights) + bias; }

double LinearNgramModel::predict(std::string_view text) const { return sigmoid(logit(features(text))); }

LinearNgramModel train_linear_features(std::span<const FeatureVector* const> xs,
                                       std::span<const std::uint8_t> labels, const LinearHyper& hyper,
                                       TrainingReport* report, const LinearNgramModel* init) {
  if (xs.size() != labels.size()) throw Error(Errc::LengthMismatch, "features and labels differ in length");
  std::size_t n_ai = 0;
  for (const auto y : labels) n_ai += y ? 1 : 0;
  const std::size_t n_human = labels.size() - n_ai;
  if (n_ai == 0 || n_human == 0) throw Error(Errc::DegenerateData, "training data holds a single class");
  if (n_ai < 10 || n_human < 10) throw Error(Errc::DegenerateData, "need at least 10 samples per class");
  if (hyper.dim_log2 < 12 || hyper.dim_log2 > 30) throw Error(Errc::Config, "dim_log2 must lie in [12, 30]");
  if (hyper.l2 < 0 || hyper.lr0 <= 0 || hyper.max_iters < 0) throw Error(Errc::Config, "bad training hyperparameters");

  const std::size_t dim = std::size_t{1} << hyper.dim_log2;
  const std::size_t n = xs.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> mu(dim, 0.0);
  for (const auto* x : xs) {
    for (const auto e : x->entries) mu[slot(e)] += sign_of(e) * inv_n;
  }

  LinearNgramModel m;
  m.n_lo = hyper.n_lo;
  m.n_hi = hyper.n_hi;
  m.dim = dim;
  m.seed = hyper.seed;
  double b = 0.0;
  if (init) {
    if (init->dim != dim || init->n_lo != hyper.n_lo || init->n_hi != hyper.n_hi || init->weights.size() != dim) {
      throw Error(Errc::Config, "warm-start model does not match the feature configuration");
    }
    m.weights = init->weights;
    b = init->bias + std::inner_product(m.weights.begin(), m.weights.end(), mu.begin(), 0.0);
  } else {
    m.weights.assign(dim, 0.0);
    Rng rng(hyper.seed);
    for (auto& w : m.weights) w = (rng.uniform01() - 0.5) * 2e-4;
  }

  std::vector<double> resid(n), trial_resid(n);
  // Loss at (w, b) on centered features; fills `r` with p - y.
  const auto evaluate = [&](const std::vector<double>& w, double bias, std::vector<double>& r) {
    const double shift = std::inner_product(w.begin(), w.end(), mu.begin(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = sparse_dot(*xs[i], w) - shift + bias;
      loss += labels[i] ? softplus(-z) : softplus(z);
      r[i] = sigmoid(z) - (labels[i] ? 1.0 : 0.0);
    }
    double reg = 0.0;
    for (const double v : w) reg += v * v;
    loss = loss * inv_n + 0.5 * hyper.l2 * reg;
    if (!std::isfinite(loss)) throw Error(Errc::NonFinite, "training loss is not finite");
    return loss;
  };

  std::vector<double> grad(dim), trial(dim);
  double loss = evaluate(m.weights, b, resid);
  TrainingReport local;
  local.loss_history.push_back(loss);
  double lr = hyper.lr0;

  const auto compute_grad = [&](const std::vector<double>& w) {
    double rsum = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = resid[i] * inv_n;
      rsum += r;
      for (const auto e : xs[i]->entries) grad[slot(e)] += sign_of(e) * r;
    }
    double norm2 = rsum * rsum;
    for (std::size_t j = 0; j < dim; ++j) {
      grad[j] += -mu[j] * rsum + hyper.l2 * w[j];
      norm2 += grad[j] * grad[j];
    }
    return std::pair{rsum, norm2};
  };

  auto [gb, gnorm2] = compute_grad(m.weights);
  for (int it = 0; it < hyper.max_iters && gnorm2 > hyper.grad_tol * hyper.grad_tol; ++it) {
    ++local.steps_tried;
    for (std::size_t j = 0; j < dim; ++j) trial[j] = m.weights[j] - lr * grad[j];
    const double trial_b = b - lr * gb;
    const double trial_loss = evaluate(trial, trial_b, trial_resid);
    if (trial_loss <= loss) {
      m.weights.swap(trial);
      resid.swap(trial_resid);
      b = trial_b;
      loss = trial_loss;
      local.loss_history.push_back(loss);
      ++local.steps_accepted;
      lr *= 1.25;
      std::tie(gb, gnorm2) = compute_grad(m.weights);
    } else {
      lr *= 0.5;
    }
  }

  m.bias = b - std::inner_product(m.weights.begin(), m.weights.end(), mu.begin(), 0.0);
  if (report) *report = std::move(local);
  return m;
}

LinearNgramModel train_linear(std::span<const LabeledText> samples, const LinearHyper& hyper,
                              TrainingReport* report) {
  const std::size_t dim = std::size_t{1} << std::clamp(hyper.dim_log2, 12, 30);
  std::vector<FeatureVector> feats;
  std::vector<const FeatureVector*> ptrs;
  std::vector<std::uint8_t> labels;
  feats.reserve(samples.size());
  for (const auto& s : samples) {
    feats.push_back(featurize(s.text, hyper.n_lo, hyper.n_hi, dim));
    labels.push_back(s.label == Label::AI ? 1 : 0);
  }
  for (const auto& f : feats) ptrs.push_back(&f);
  return train_linear_features(ptrs, labels, hyper, report);
}

void save_model(const LinearNgramModel& model, const std::filesystem::path& path) {
  nlohmann::json weights = nlohmann::json::array();
  for (std::size_t j = 0; j < model.weights.size(); ++j) {
    if (model.weights[j] != 0.0) weights.push_back({j, model.weights[j]});
  }
  const nlohmann::json j = {{"format", "failopt-linear-ngram"},
                            {"version", LinearNgramModel::kFormatVersion},
                            {"n_range", {model.n_lo, model.n_hi}},
                            {"dim", model.dim},
                            {"bias", model.bias},
                            {"seed", model.seed},
                            {"weights", weights}};
  std::ofstream out(path, std::ios::trunc);
  out << j.dump();
  if (!out) throw Error(Errc::Io, "cannot write model " + path.string());
}

LinearNgramModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open model " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    const auto version = j.at("version").get<int>();
    if (j.value("format", std::string{}) != "failopt-linear-ngram" ||
        version != LinearNgramModel::kFormatVersion) {
      throw Error(Errc::VersionMismatch, "model " + path.string() + " has format version " +
                                             std::to_string(version) + ", expected " +
                                             std::to_string(LinearNgramModel::kFormatVersion));
    }
    LinearNgramModel m;
    const auto range = j.at("n_range").get<std::vector<int>>();
    if (range.size() != 2) throw Error(Errc::Parse, "n_range needs two values");
    m.n_lo = range[0];
    m.n_hi = range[1];
    m.dim = j.at("dim").get<std::size_t>();
    validate_dim(m.dim);
    m.bias = j.at("bias").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.weights.assign(m.dim, 0.0);
    for (const auto& e : j.at("weights")) {
      const auto idx = e.at(0).get<std::size_t>();
      if (idx >= m.dim) throw Error(Errc::Parse, "weight index out of range");
      m.weights[idx] = e.at(1).get<double>();
      if (!std::isfinite(m.weights[idx])) throw Error(Errc::NonFinite, "non-finite weight in model file");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, "malformed model " + path.string() + ": " + e.what());
  }
}

LinearDetector::LinearDetector(std::shared_ptr<const LinearNgramModel> model, std::string name)
    : model_(std::move(model)), name_(std::move(name)) {
  if (!model_) throw Error(Errc::Config, "linear detector needs a model");
}

DetectorScore LinearDetector::score(const std::string& text) const {
  const double z = model_->logit(model_->features(text));
  return {sigmoid(z), z, name_};
}

}  // namespace failopt::detect
