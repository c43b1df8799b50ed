#include "pbgcn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "pbgcn/eval.hpp"

namespace pbgcn {

void TrainConfig::validate() const {
  require(base_lr > 0.0, errc::InvalidSpec, "base_lr must be positive");
  require(decay_factor > 0.0 && decay_factor <= 1.0, errc::InvalidSpec,
          "decay_factor must lie in (0, 1]");
  require(epochs >= 1, errc::InvalidSpec, "epochs must be >= 1");
  require(batch_size >= 1, errc::InvalidSpec, "batch_size must be >= 1");
  require(momentum >= 0.0 && momentum < 1.0, errc::InvalidSpec,
          "momentum must lie in [0, 1)");
  require(weight_decay >= 0.0, errc::InvalidSpec, "weight_decay must be non-negative");
  require(threads >= 1, errc::InvalidSpec, "threads must be >= 1");
  for (size_t i = 0; i < decay_epochs.size(); ++i) {
    require(decay_epochs[i] >= 0 && decay_epochs[i] < epochs, errc::InvalidSpec,
            "decay epochs must lie in [0, epochs)");
    if (i > 0) {
      require(decay_epochs[i] > decay_epochs[i - 1], errc::InvalidSpec,
              "decay epochs must be strictly increasing");
    }
  }
}

double lr_at(int epoch, const TrainConfig& cfg) {
  require(epoch >= 0 && epoch < cfg.epochs, errc::EpochOutOfRange,
          "epoch " + std::to_string(epoch) + " outside [0," +
              std::to_string(cfg.epochs) + ")");
  int decays = 0;
  for (int d : cfg.decay_epochs) {
    if (d <= epoch) ++decays;
  }
  return cfg.base_lr * std::pow(cfg.decay_factor, decays);
}

template <class S>
void sgd_step(const std::vector<ParameterT<S>*>& params, double lr, double momentum,
              double weight_decay, long long batch_samples) {
  require(batch_samples >= 1, errc::InvalidSpec, "batch_samples must be >= 1");
  const S scale = S(1) / static_cast<S>(batch_samples);
  for (ParameterT<S>* p : params) {
    require(p->grad_updates > 0, errc::MissingGrad,
            "parameter '" + p->name + "' has no accumulated gradient");
    const S wd = p->apply_decay ? static_cast<S>(weight_decay) : S(0);
    for (size_t i = 0; i < p->value.data.size(); ++i) {
      const S g = p->grad.data[i] * scale + wd * p->value.data[i];
      p->velocity.data[i] = static_cast<S>(momentum) * p->velocity.data[i] + g;
      p->value.data[i] -= static_cast<S>(lr) * p->velocity.data[i];
    }
    p->zero_grad();
  }
}

std::string log_csv(const std::vector<EpochRecord>& log) {
  std::ostringstream out;
  out << "epoch,lr,train_loss,train_acc,val_acc\n";
  char buf[128];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.lr,
                  r.train_loss, r.train_acc, r.val_acc);
    out << buf;
  }
  return out.str();
}

namespace {

// Forward+backward over a contiguous index range; gradients land in `sink`,
// losses/hits in the out-params. Runs on its own thread in sharded mode.
template <class S>
void process_shard(const ModelT<S>& model, const std::vector<LabeledFeature>& data,
                   const std::vector<int>& order, size_t begin, size_t end,
                   bool with_grad,
                   std::unordered_map<const ParameterT<S>*, TensorT<S>>& sink,
                   double& loss_sum, long long& hits) {
  loss_sum = 0.0;
  hits = 0;
  for (size_t i = begin; i < end; ++i) {
    const LabeledFeature& item = data[order[i]];
    TapeT<S> tape;
    auto logits_id = model.forward(tape, item.features);
    auto loss_id = tape.softmax_cross_entropy(logits_id, item.label);
    loss_sum += static_cast<double>(tape.value(loss_id).data[0]);
    const auto& lv = tape.value(logits_id);
    std::vector<double> logits(lv.data.begin(), lv.data.end());
    if (argmax_lowest(logits) == item.label) ++hits;
    if (with_grad) tape.backward(loss_id, sink);
  }
}

template <class S>
std::pair<double, long long> run_batch(ModelT<S>& model,
                                       const std::vector<LabeledFeature>& data,
                                       const std::vector<int>& order, size_t begin,
                                       size_t end, int threads, bool with_grad) {
  const size_t count = end - begin;
  const int used = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  std::vector<std::unordered_map<const ParameterT<S>*, TensorT<S>>> sinks(used);
  std::vector<double> losses(used, 0.0);
  std::vector<long long> hits(used, 0);

  if (used == 1) {
    process_shard(model, data, order, begin, end, with_grad, sinks[0], losses[0],
                  hits[0]);
  } else {
    std::vector<std::thread> workers;
    const size_t per = (count + used - 1) / used;
    for (int w = 0; w < used; ++w) {
      const size_t b = begin + static_cast<size_t>(w) * per;
      const size_t e = std::min(end, b + per);
      if (b >= e) {
        break;
      }
      workers.emplace_back([&, w, b, e] {
        process_shard(model, data, order, b, e, with_grad, sinks[w], losses[w], hits[w]);
      });
    }
    for (auto& t : workers) t.join();
  }

  if (with_grad) {
    // Deterministic reduction: shard order, then the model's parameter order.
    auto params = model.parameters();
    for (int w = 0; w < used; ++w) {
      for (ParameterT<S>* p : params) {
        auto it = sinks[w].find(p);
        if (it == sinks[w].end()) continue;
        for (size_t i = 0; i < p->grad.data.size(); ++i) {
          p->grad.data[i] += it->second.data[i];
        }
        ++p->grad_updates;
      }
    }
  }

  double loss_sum = 0.0;
  long long hit_sum = 0;
  for (int w = 0; w < used; ++w) {
    loss_sum += losses[w];
    hit_sum += hits[w];
  }
  return {loss_sum, hit_sum};
}

}  // namespace

template <class S>
std::pair<double, double> run_epoch(ModelT<S>& model,
                                    const std::vector<LabeledFeature>& train_set,
                                    const std::vector<int>& order, double lr,
                                    const TrainConfig& cfg) {
  double loss_sum = 0.0;
  long long hits = 0;
  for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const size_t stop = std::min(order.size(), start + cfg.batch_size);
    auto [l, h] = run_batch(model, train_set, order, start, stop, cfg.threads, true);
    loss_sum += l;
    hits += h;
    sgd_step(model.parameters(), lr, cfg.momentum, cfg.weight_decay,
             static_cast<long long>(stop - start));
  }
  const double n = static_cast<double>(order.size());
  return {loss_sum / n, static_cast<double>(hits) / n};
}

template <class S>
TrainResult train(ModelT<S>& model, const std::vector<LabeledFeature>& train_set,
                  const std::vector<LabeledFeature>& val_set, const TrainConfig& cfg,
                  const std::string& checkpoint_path) {
  cfg.validate();
  require(!train_set.empty(), errc::EmptyDataset, "training set is empty");
  require(!val_set.empty(), errc::EmptyDataset, "validation set is empty");
  const int k = model.config().num_classes;
  for (const auto& item : train_set) {
    require(item.label >= 0 && item.label < k, errc::InvalidLabel,
            "training label outside [0,K)");
  }

  std::mt19937_64 shuffle_rng(cfg.seed);
  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    auto [train_loss, train_acc] = run_epoch(model, train_set, order, lr, cfg);
    require(std::isfinite(train_loss), errc::DivergedLoss,
            "loss became non-finite at epoch " + std::to_string(epoch));

    const double val_acc = evaluate(model, val_set).accuracy;
    result.log.push_back({epoch, lr, train_loss, train_acc, val_acc});
    if (val_acc > result.best_val_acc) {
      result.best_val_acc = val_acc;
      result.best_epoch = epoch;
      if (!checkpoint_path.empty()) model.save_checkpoint(checkpoint_path);
    }
  }
  return result;
}

SkeletonSequence harmonize_sequence_length(const SkeletonSequence& seq, int frames) {
  require(frames >= 1, errc::InvalidSpec, "target frame count must be >= 1");
  require(seq.frames >= 1, errc::ShapeMismatch, "sequence has no frames");
  if (seq.frames == frames) return seq;

  SkeletonSequence out;
  out.frames = frames;
  out.joints = seq.joints;
  out.label = seq.label;
  out.subject_id = seq.subject_id;
  out.camera_id = seq.camera_id;
  out.action_id = seq.action_id;
  const size_t frame_len = static_cast<size_t>(seq.joints) * 3;
  for (const auto& body : seq.bodies) {
    std::vector<double> coords(static_cast<size_t>(frames) * frame_len);
    for (int t = 0; t < frames; ++t) {
      const int src = std::min(t, seq.frames - 1);  // pad with the last frame
      std::copy(body.begin() + src * frame_len, body.begin() + (src + 1) * frame_len,
                coords.begin() + static_cast<size_t>(t) * frame_len);
    }
    out.bodies.push_back(std::move(coords));
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> feature_channel_stats(
    const std::vector<LabeledFeature>& data) {
  require(!data.empty(), errc::EmptyDataset, "cannot compute stats of an empty set");
  const int channels = data.front().features.channels;
  std::vector<double> sum(channels, 0.0), sq(channels, 0.0);
  long long count = 0;
  for (const auto& item : data) {
    const FeatureTensor& f = item.features;
    require(f.channels == channels, errc::ShapeMismatch,
            "feature channel count varies across the dataset");
    for (int m = 0; m < f.bodies; ++m) {
      if (m < static_cast<int>(f.body_valid.size()) && !f.body_valid[m]) continue;
      for (int c = 0; c < channels; ++c) {
        for (int t = 0; t < f.frames; ++t) {
          for (int v = 0; v < f.joints; ++v) {
            const double x = f.at(c, t, v, m);
            sum[c] += x;
            sq[c] += x * x;
          }
        }
      }
      count += static_cast<long long>(f.frames) * f.joints;
    }
  }
  require(count > 0, errc::EmptyDataset, "no valid bodies in the dataset");
  std::vector<double> mean(channels), stddev(channels);
  for (int c = 0; c < channels; ++c) {
    mean[c] = sum[c] / static_cast<double>(count);
    const double var = std::max(0.0, sq[c] / static_cast<double>(count) - mean[c] * mean[c]);
    stddev[c] = std::sqrt(var);
    if (stddev[c] < 1e-8) stddev[c] = 1.0;
  }
  return {std::move(mean), std::move(stddev)};
}

template void sgd_step<float>(const std::vector<ParameterT<float>*>&, double, double,
                              double, long long);
template void sgd_step<double>(const std::vector<ParameterT<double>*>&, double, double,
                               double, long long);
template TrainResult train<float>(ModelT<float>&, const std::vector<LabeledFeature>&,
                                  const std::vector<LabeledFeature>&, const TrainConfig&,
                                  const std::string&);
template TrainResult train<double>(ModelT<double>&, const std::vector<LabeledFeature>&,
                                   const std::vector<LabeledFeature>&, const TrainConfig&,
                                   const std::string&);
template std::pair<double, double> run_epoch<float>(ModelT<float>&,
                                                    const std::vector<LabeledFeature>&,
                                                    const std::vector<int>&, double,
                                                    const TrainConfig&);
template std::pair<double, double> run_epoch<double>(ModelT<double>&,
                                                     const std::vector<LabeledFeature>&,
                                                     const std::vector<int>&, double,
                                                     const TrainConfig&);

}  // namespace pbgcn
