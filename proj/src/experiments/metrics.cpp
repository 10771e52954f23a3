#include "mdat/experiments/metrics.hpp"

#include <stdexcept>
#include <string>

namespace mdat::experiments {

ConfusionMatrix::ConfusionMatrix(std::size_t n_classes) : n_(n_classes), counts_(n_classes * n_classes, 0) {}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) { ++at(truth, predicted); }

std::size_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
  if (truth >= n_ || predicted >= n_) throw std::out_of_range("confusion index out of range");
  return counts_[truth * n_ + predicted];
}

std::size_t& ConfusionMatrix::at(std::size_t truth, std::size_t predicted) {
  if (truth >= n_ || predicted >= n_) throw std::out_of_range("confusion index out of range");
  return counts_[truth * n_ + predicted];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::size_t ConfusionMatrix::row_total(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += at(truth, p);
  return s;
}

std::vector<double> per_class_recall(const ConfusionMatrix& m) {
  std::vector<double> recall(m.n_classes(), 0.0);
  for (std::size_t c = 0; c < m.n_classes(); ++c) {
    const std::size_t row = m.row_total(c);
    if (row) recall[c] = double(m.at(c, c)) / double(row);
  }
  return recall;
}

double unweighted_accuracy(const ConfusionMatrix& m) {
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < m.n_classes(); ++c) {
    const std::size_t row = m.row_total(c);
    if (row == 0) continue;
    sum += double(m.at(c, c)) / double(row);
    ++present;
  }
  if (present == 0) throw std::invalid_argument("unweighted accuracy of an empty confusion matrix");
  return sum / double(present);
}

MetricsReport make_report(const ConfusionMatrix& m) {
  MetricsReport r;
  r.confusion = m;
  r.recall = per_class_recall(m);
  r.ua = unweighted_accuracy(m);
  r.count = m.total();
  return r;
}

void to_json(nlohmann::json& j, const ConfusionMatrix& m) {
  j = nlohmann::json::array();
  for (std::size_t t = 0; t < m.n_classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < m.n_classes(); ++p) row.push_back(m.at(t, p));
    j.push_back(row);
  }
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = nlohmann::json{{"confusion", r.confusion}, {"recall", r.recall}, {"ua", r.ua}, {"count", r.count}};
}

}  // namespace mdat::experiments
