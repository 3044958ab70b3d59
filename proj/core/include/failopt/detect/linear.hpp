#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "failopt/detect/detector.hpp"

namespace failopt::detect {

/// Hashed binary character n-gram features. Entries are sorted by index and
/// encoded as +(index + 1) or -(index + 1) for a feature value of +1 or -1.
struct FeatureVector {
  std::vector<std::int32_t> entries;
};

/// Feature j is the sign of the summed hash signs of the distinct n-grams
/// (orders n_lo..n_hi, over bytes) that hash to j.
FeatureVector featurize(std::string_view text, int n_lo, int n_hi, std::size_t dim);

struct LinearHyper {
  int n_lo = 3;
  int n_hi = 4;
  int dim_log2 = 18;
  double l2 = 1e-2;
  int max_iters = 150;  // gradient steps tried, rejected ones included
  double lr0 = 1e-3;
  double grad_tol = 1e-7;
  std::uint64_t seed = 17;
};

struct LinearNgramModel {
  static constexpr int kFormatVersion = 1;

  int n_lo = 3;
  int n_hi = 4;
  std::size_t dim = std::size_t{1} << 18;
  std::vector<double> weights;
  double bias = 0.0;
  std::uint64_t seed = 0;

  FeatureVector features(std::string_view text) const { return featurize(text, n_lo, n_hi, dim); }
  double logit(const FeatureVector& x) const;
  /// AI-class probability.
  double predict(std::string_view text) const;
};

struct TrainingReport {
  std::vector<double> loss_history;  // loss after every accepted step, starting point first
  int steps_tried = 0;
  int steps_accepted = 0;
};

/// Mean logistic loss plus (l2/2)|w|^2 by full-batch gradient descent on
/// mean-centered features. A step that would raise the loss is rejected and
/// the step size halved; accepted steps grow it by 1.25. Labels: 1 = AI.
/// `init` continues training from an existing model with the same features.
LinearNgramModel train_linear_features(std::span<const FeatureVector* const> xs,
                                       std::span<const std::uint8_t> labels, const LinearHyper& hyper,
                                       TrainingReport* report = nullptr,
                                       const LinearNgramModel* init = nullptr);

struct LabeledText {
  std::string text;
  Label label = Label::Human;
};

/// Requires both labels with at least 10 samples each (DegenerateData).
LinearNgramModel train_linear(std::span<const LabeledText> samples, const LinearHyper& hyper,
                              TrainingReport* report = nullptr);

void save_model(const LinearNgramModel& model, const std::filesystem::path& path);
/// Throws VersionMismatch for a different format version.
LinearNgramModel load_model(const std::filesystem::path& path);

class LinearDetector final : public Detector {
 public:
  explicit LinearDetector(std::shared_ptr<const LinearNgramModel> model, std::string name = "linear");
  std::string id() const override { return name_; }
  DetectorScore score(const std::string& text) const override;
  bool probabilistic() const override { return true; }
  const LinearNgramModel& model() const noexcept { return *model_; }

 private:
  std::shared_ptr<const LinearNgramModel> model_;
  std::string name_;
};

}  // namespace failopt::detect
