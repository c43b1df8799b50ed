#ifndef PBGCN_TRAINING_HPP
#define PBGCN_TRAINING_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pbgcn/dataio.hpp"
#include "pbgcn/network.hpp"

namespace pbgcn {

struct TrainConfig {
  double base_lr = 0.1;
  double decay_factor = 0.1;
  std::vector<int> decay_epochs{20, 50, 70};
  int epochs = 80;
  int batch_size = 64;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  uint64_t seed = 1;
  int threads = 1;  // gradient reduction order is fixed per thread count

  void validate() const;
};

/// Step-decay schedule: base_lr * decay_factor^(#decay epochs passed).
double lr_at(int epoch, const TrainConfig& cfg);

/// v <- momentum*v + grad + weight_decay*param; param <- param - lr*v.
/// Gradients are divided by batch_samples first (batch mean). Momentum
/// buffers persist on the parameters. Parameters with apply_decay = false
/// skip the decay term.
template <class S>
void sgd_step(const std::vector<ParameterT<S>*>& params, double lr, double momentum,
              double weight_decay, long long batch_samples);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  double best_val_acc = -1.0;
  int best_epoch = -1;
};

/// CSV with header `epoch,lr,train_loss,train_acc,val_acc`, one row per
/// epoch, doubles printed with 17 significant digits so identical runs
/// produce identical bytes.
std::string log_csv(const std::vector<EpochRecord>& log);

/// Mini-batch SGD over the train set, evaluating on the val set after every
/// epoch. Deterministic given (seed, config, data): shuffling, init and
/// gradient reduction all use fixed streams and orders. Saves the best-val
/// checkpoint to checkpoint_path when non-empty. Aborts with DivergedLoss
/// if the loss goes non-finite.
template <class S>
TrainResult train(ModelT<S>& model, const std::vector<LabeledFeature>& train_set,
                  const std::vector<LabeledFeature>& val_set, const TrainConfig& cfg,
                  const std::string& checkpoint_path = "");

/// One pass over `order` at a fixed learning rate; returns (mean loss,
/// accuracy) over those samples. Exposed for tests that need optimizer-off
/// epochs or custom schedules.
template <class S>
std::pair<double, double> run_epoch(ModelT<S>& model,
                                    const std::vector<LabeledFeature>& train_set,
                                    const std::vector<int>& order, double lr,
                                    const TrainConfig& cfg);

/// Pad with the last frame or truncate so the sequence has exactly `frames`.
SkeletonSequence harmonize_sequence_length(const SkeletonSequence& seq, int frames);

/// Per-channel mean and std over all samples, frames, vertices and valid
/// bodies; stds below 1e-8 are clamped to 1 so constant channels stay inert.
std::pair<std::vector<double>, std::vector<double>> feature_channel_stats(
    const std::vector<LabeledFeature>& data);

extern template void sgd_step<float>(const std::vector<ParameterT<float>*>&, double,
                                     double, double, long long);
extern template void sgd_step<double>(const std::vector<ParameterT<double>*>&, double,
                                      double, double, long long);
extern template TrainResult train<float>(ModelT<float>&,
                                         const std::vector<LabeledFeature>&,
                                         const std::vector<LabeledFeature>&,
                                         const TrainConfig&, const std::string&);
extern template TrainResult train<double>(ModelT<double>&,
                                          const std::vector<LabeledFeature>&,
                                          const std::vector<LabeledFeature>&,
                                          const TrainConfig&, const std::string&);
extern template std::pair<double, double> run_epoch<float>(
    ModelT<float>&, const std::vector<LabeledFeature>&, const std::vector<int>&, double,
    const TrainConfig&);
extern template std::pair<double, double> run_epoch<double>(
    ModelT<double>&, const std::vector<LabeledFeature>&, const std::vector<int>&, double,
    const TrainConfig&);

}  // namespace pbgcn

#endif
