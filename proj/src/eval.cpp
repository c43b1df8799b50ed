#include "pbgcn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace pbgcn {

ConfusionMatrix::ConfusionMatrix(int classes, std::vector<std::string> class_names)
    : classes_(classes), names_(std::move(class_names)) {
  require(classes >= 1, errc::InvalidSpec, "confusion matrix needs K >= 1");
  if (!names_.empty()) {
    require(static_cast<int>(names_.size()) == classes, errc::InvalidSpec,
            "class name count must equal K");
  }
  counts_.assign(static_cast<size_t>(classes) * classes, 0);
}

void ConfusionMatrix::add(int truth, int predicted, long long count) {
  require(truth >= 0 && truth < classes_ && predicted >= 0 && predicted < classes_,
          errc::InvalidLabel, "confusion matrix index out of range");
  require(count >= 0, errc::InvalidSpec, "counts must be non-negative");
  counts_[static_cast<size_t>(truth) * classes_ + predicted] += count;
}

long long ConfusionMatrix::at(int truth, int predicted) const {
  require(truth >= 0 && truth < classes_ && predicted >= 0 && predicted < classes_,
          errc::InvalidLabel, "confusion matrix index out of range");
  return counts_[static_cast<size_t>(truth) * classes_ + predicted];
}

long long ConfusionMatrix::total() const {
  long long t = 0;
  for (long long c : counts_) t += c;
  return t;
}

long long ConfusionMatrix::trace() const {
  long long t = 0;
  for (int i = 0; i < classes_; ++i) t += counts_[static_cast<size_t>(i) * classes_ + i];
  return t;
}

double ConfusionMatrix::accuracy() const {
  const long long n = total();
  if (n == 0) return 0.0;
  return static_cast<double>(trace()) / static_cast<double>(n);
}

std::vector<long long> ConfusionMatrix::row_sums() const {
  std::vector<long long> sums(classes_, 0);
  for (int i = 0; i < classes_; ++i) {
    for (int j = 0; j < classes_; ++j) {
      sums[i] += counts_[static_cast<size_t>(i) * classes_ + j];
    }
  }
  return sums;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream out;
  out << "true,pred,count\n";
  for (int i = 0; i < classes_; ++i) {
    for (int j = 0; j < classes_; ++j) {
      out << i << "," << j << "," << counts_[static_cast<size_t>(i) * classes_ + j]
          << "\n";
    }
  }
  return out.str();
}

std::vector<ConfusedPair> confused_pairs(const ConfusionMatrix& cm, int top_k,
                                         bool merge_symmetric) {
  std::vector<ConfusedPair> pairs;
  if (merge_symmetric) {
    std::map<std::pair<int, int>, long long> merged;
    for (int i = 0; i < cm.classes(); ++i) {
      for (int j = 0; j < cm.classes(); ++j) {
        if (i == j || cm.at(i, j) == 0) continue;
        merged[{std::min(i, j), std::max(i, j)}] += cm.at(i, j);
      }
    }
    for (const auto& [key, count] : merged) {
      pairs.push_back({key.first, key.second, count});
    }
  } else {
    for (int i = 0; i < cm.classes(); ++i) {
      for (int j = 0; j < cm.classes(); ++j) {
        if (i != j && cm.at(i, j) > 0) pairs.push_back({i, j, cm.at(i, j)});
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const ConfusedPair& a, const ConfusedPair& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.truth != b.truth) return a.truth < b.truth;
    return a.predicted < b.predicted;
  });
  if (top_k >= 0 && static_cast<size_t>(top_k) < pairs.size()) pairs.resize(top_k);
  return pairs;
}

std::string render_pgm(const ConfusionMatrix& cm) {
  const int k = cm.classes();
  std::ostringstream out;
  out << "P5\n" << k << " " << k << "\n255\n";
  for (int i = 0; i < k; ++i) {
    long long row_max = 0;
    for (int j = 0; j < k; ++j) row_max = std::max(row_max, cm.at(i, j));
    for (int j = 0; j < k; ++j) {
      double intensity =
          row_max == 0 ? 0.0
                       : static_cast<double>(cm.at(i, j)) / static_cast<double>(row_max);
      const int gray = 255 - static_cast<int>(std::lround(255.0 * intensity));
      out.put(static_cast<char>(static_cast<unsigned char>(gray)));
    }
  }
  return out.str();
}

void render_heatmap(const ConfusionMatrix& cm, const std::string& pgm_path,
                    const std::string& csv_path) {
  {
    std::ofstream out(pgm_path, std::ios::binary);
    require(out.good(), errc::IOError, "cannot write '" + pgm_path + "'");
    const std::string bytes = render_pgm(cm);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), errc::IOError, "failed writing '" + pgm_path + "'");
  }
  {
    std::ofstream out(csv_path, std::ios::binary);
    require(out.good(), errc::IOError, "cannot write '" + csv_path + "'");
    out << cm.to_csv();
    require(out.good(), errc::IOError, "failed writing '" + csv_path + "'");
  }
}

int argmax_lowest(const std::vector<double>& values) {
  require(!values.empty(), errc::EmptyEvalSet, "argmax of empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

template <class S>
EvalResult evaluate(const ModelT<S>& model, const std::vector<LabeledFeature>& eval_set) {
  require(!eval_set.empty(), errc::EmptyEvalSet, "evaluation set is empty");
  const int k = model.config().num_classes;
  EvalResult result{0.0, ConfusionMatrix(k), {}};
  result.predictions.reserve(eval_set.size());
  for (const auto& item : eval_set) {
    require(item.label >= 0 && item.label < k, errc::InvalidLabel,
            "eval label " + std::to_string(item.label) + " outside [0," +
                std::to_string(k) + ")");
    const int pred = argmax_lowest(model.logits(item.features));
    result.matrix.add(item.label, pred);
    result.predictions.push_back(pred);
  }
  result.accuracy = result.matrix.accuracy();
  return result;
}

template EvalResult evaluate<float>(const ModelT<float>&,
                                    const std::vector<LabeledFeature>&);
template EvalResult evaluate<double>(const ModelT<double>&,
                                     const std::vector<LabeledFeature>&);

}  // namespace pbgcn
