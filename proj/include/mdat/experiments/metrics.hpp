#pragma once

#include <cstddef>
#include <vector>

#include "json.hpp"

namespace mdat::experiments {

/// counts[true][predicted].
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t n_classes = 0);

  void add(std::size_t truth, std::size_t predicted);
  std::size_t at(std::size_t truth, std::size_t predicted) const;
  std::size_t& at(std::size_t truth, std::size_t predicted);
  std::size_t n_classes() const { return n_; }
  std::size_t total() const;
  std::size_t row_total(std::size_t truth) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
};

/// Recall per class; NaN-free: classes without samples get 0 and are
/// excluded from UA by the caller.
std::vector<double> per_class_recall(const ConfusionMatrix& m);

/// Mean recall over classes with at least one true sample. Throws
/// std::invalid_argument on an all-zero matrix.
double unweighted_accuracy(const ConfusionMatrix& m);

struct MetricsReport {
  ConfusionMatrix confusion;
  std::vector<double> recall;
  double ua = 0.0;
  std::size_t count = 0;
};

MetricsReport make_report(const ConfusionMatrix& m);

void to_json(nlohmann::json& j, const ConfusionMatrix& m);
void to_json(nlohmann::json& j, const MetricsReport& r);

}  // namespace mdat::experiments
