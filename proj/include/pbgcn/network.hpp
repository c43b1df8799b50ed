#ifndef PBGCN_NETWORK_HPP
#define PBGCN_NETWORK_HPP

#include <optional>
#include <string>
#include <vector>

#include "pbgcn/graph.hpp"
#include "pbgcn/signals.hpp"
#include "pbgcn/tensor.hpp"

namespace pbgcn {

struct UnitPlanEntry {
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
};

struct NetworkConfig {
  std::string scheme_name;
  SignalTag signal = SignalTag::DRDT;
  int tau = 9;
  std::vector<UnitPlanEntry> plan;
  int num_classes = 0;
  double self_loop_weight = 1.0;
  int bodies = 2;
  int frames = 64;
  bool share_part_weights = false;

  NetworkConfig() : plan(default_plan()) {}

  /// Nine units: three with 64 output channels, three with 128, three with
  /// 256; temporal stride 2 at the two channel-doubling units.
  static std::vector<UnitPlanEntry> default_plan();
  void validate() const;
};

/// Parameters of one spatio-temporal unit: a channel transform and an edge
/// mask per part, one aggregation weight per part, one temporal kernel, and
/// a pointwise residual projection when the shapes or stride require one.
template <class S>
struct STUnitParamsT {
  std::vector<ParameterT<S>> part_transforms;  // [C_out, C_in]; one entry when shared
  std::vector<ParameterT<S>> edge_masks;       // [Vp, Vp], multiplicative on A_hat
  ParameterT<S> agg_weights;                   // [n]
  ParameterT<S> temporal_kernel;               // [C_out, C_out, tau]
  std::optional<ParameterT<S>> residual_proj;  // [C_out, C_in, 1]
  int stride = 1;
};

/// The part-based spatio-temporal graph convolutional network. Holds the
/// partition scheme, the per-part normalized adjacency operators (with the
/// configured self-loop weight added after normalization) and all learnable
/// parameters. Forward passes are recorded on a caller-supplied tape so the
/// same code path serves training, evaluation and gradient checks.
template <class S>
class ModelT {
 public:
  using TapeType = TapeT<S>;
  using Id = typename TapeT<S>::NodeId;

  ModelT(const NetworkConfig& cfg, const SkeletonGraph& graph,
         const PartitionScheme& scheme, uint64_t seed);

  /// Per-part spatial convolution: gather X_p, apply the part transform,
  /// then mix along the vertex axis with the masked operator.
  std::vector<Id> spatial_part_conv(TapeType& tape, Id x, int unit) const;

  /// Weighted-sum fusion of part outputs scattered onto the full vertex set;
  /// shared vertices accumulate every owning part's contribution.
  Id aggregate_parts(TapeType& tape, const std::vector<Id>& part_outputs,
                     int unit) const;

  /// aggregate_parts plus neighbor contributions across declared cross-part
  /// edges; identical to aggregate_parts when the scheme has none.
  Id cross_part_edge_aggregate(TapeType& tape, const std::vector<Id>& part_outputs,
                               int unit) const;

  /// relu(temporal_conv(relu(aggregate(spatial)), W_T, stride) + residual(x)).
  Id st_unit_forward(TapeType& tape, Id x, int unit) const;

  /// Standardizes, casts and registers the input features as a constant.
  Id input_node(TapeType& tape, const FeatureTensor& input) const;

  /// Full network: head channel lift, all ST units, global average pooling
  /// over time and vertices, mean over valid bodies, classifier. Returns the
  /// logits node ([num_classes]).
  Id forward(TapeType& tape, const FeatureTensor& input) const;

  /// Convenience forward on a private tape.
  std::vector<double> logits(const FeatureTensor& input) const;

  std::vector<ParameterT<S>*> parameters();
  std::vector<const ParameterT<S>*> parameters() const;

  /// Frozen per-channel input statistics (train-split mean/std).
  void set_standardization(std::vector<double> mean, std::vector<double> stddev);
  const std::vector<double>& input_mean() const { return input_mean_; }
  const std::vector<double>& input_std() const { return input_std_; }

  const NetworkConfig& config() const { return cfg_; }
  const PartitionScheme& scheme() const { return scheme_; }
  int input_channels() const { return input_channels_; }
  int num_vertices() const { return num_vertices_; }
  /// Canonical description of the configuration this model was built for;
  /// checkpoints must echo it exactly.
  const std::string& config_echo() const { return echo_; }

  /// A_hat_p = D^{-1/2} A_p D^{-1/2} + lambda * I, the fixed part operator.
  const TensorT<S>& part_operator(int p) const { return a_hat_.at(p); }

  STUnitParamsT<S>& unit(int i) { return units_.at(i); }
  const STUnitParamsT<S>& unit(int i) const { return units_.at(i); }
  int unit_count() const { return static_cast<int>(units_.size()); }
  ParameterT<S>& head_transform() { return head_transform_; }
  ParameterT<S>& classifier_weight() { return classifier_weight_; }
  ParameterT<S>& classifier_bias() { return classifier_bias_; }

  void save_checkpoint(const std::string& path) const;
  /// Loads parameters saved by save_checkpoint; rejects files whose config
  /// echo differs from this model's.
  void load_checkpoint(const std::string& path);

 private:
  void init_parameters(uint64_t seed);
  std::vector<S> body_weights(const FeatureTensor& input) const;

  NetworkConfig cfg_;
  PartitionScheme scheme_;
  int num_vertices_ = 0;
  int input_channels_ = 0;
  std::vector<TensorT<S>> a_hat_;
  std::vector<double> input_mean_, input_std_;
  ParameterT<S> head_transform_;
  std::vector<STUnitParamsT<S>> units_;
  ParameterT<S> classifier_weight_;
  ParameterT<S> classifier_bias_;
  std::string echo_;
};

using Model = ModelT<double>;

extern template class ModelT<float>;
extern template class ModelT<double>;

}  // namespace pbgcn

#endif
