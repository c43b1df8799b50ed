#ifndef PBGCN_EVAL_HPP
#define PBGCN_EVAL_HPP

#include <string>
#include <vector>

#include "pbgcn/dataio.hpp"
#include "pbgcn/network.hpp"

namespace pbgcn {

/// K x K counts of (true class, predicted class); rows are true classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes, std::vector<std::string> class_names = {});

  void add(int truth, int predicted, long long count = 1);
  long long at(int truth, int predicted) const;
  int classes() const { return classes_; }
  const std::vector<std::string>& class_names() const { return names_; }

  long long total() const;
  long long trace() const;
  /// trace / total; 0 when the matrix is empty.
  double accuracy() const;
  std::vector<long long> row_sums() const;

  /// CSV with header `true,pred,count`, all K*K cells in row-major order.
  std::string to_csv() const;

 private:
  int classes_;
  std::vector<long long> counts_;
  std::vector<std::string> names_;
};

struct ConfusedPair {
  int truth = 0;
  int predicted = 0;
  long long count = 0;
};

/// Off-diagonal entries with nonzero count, sorted by descending count
/// (ties: ascending true, then predicted index). top_k < 0 returns all.
/// With merge_symmetric, (a,b) and (b,a) are combined into one entry.
std::vector<ConfusedPair> confused_pairs(const ConfusionMatrix& cm, int top_k,
                                         bool merge_symmetric = false);

/// Binary PGM (P5) with row-normalized intensities: 0 count renders white,
/// the row maximum renders black. Deterministic bytes for a given matrix.
std::string render_pgm(const ConfusionMatrix& cm);

/// Writes the PGM plus a raw-count CSV next to it.
void render_heatmap(const ConfusionMatrix& cm, const std::string& pgm_path,
                    const std::string& csv_path);

struct EvalResult {
  double accuracy = 0.0;
  ConfusionMatrix matrix;
  std::vector<int> predictions;
};

/// Runs the model over the eval set; prediction is the argmax of the logits
/// with ties broken toward the lowest class index.
template <class S>
EvalResult evaluate(const ModelT<S>& model, const std::vector<LabeledFeature>& eval_set);

extern template EvalResult evaluate<float>(const ModelT<float>&,
                                           const std::vector<LabeledFeature>&);
extern template EvalResult evaluate<double>(const ModelT<double>&,
                                            const std::vector<LabeledFeature>&);

/// Lowest-index argmax used for predictions everywhere.
int argmax_lowest(const std::vector<double>& values);

}  // namespace pbgcn

#endif
