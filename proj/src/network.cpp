#include "pbgcn/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace pbgcn {

std::vector<UnitPlanEntry> NetworkConfig::default_plan() {
  return {
      {64, 64, 1},  {64, 64, 1},   {64, 64, 1},
      {64, 128, 2}, {128, 128, 1}, {128, 128, 1},
      {128, 256, 2}, {256, 256, 1}, {256, 256, 1},
  };
}

void NetworkConfig::validate() const {
  require(!plan.empty(), errc::InvalidSpec, "unit plan must not be empty");
  for (size_t i = 0; i < plan.size(); ++i) {
    const auto& u = plan[i];
    require(u.in_channels > 0 && u.out_channels > 0, errc::InvalidSpec,
            "unit channel counts must be positive");
    require(u.stride == 1 || u.stride == 2, errc::InvalidSpec,
            "unit stride must be 1 or 2");
    if (i > 0) {
      require(plan[i - 1].out_channels == u.in_channels, errc::InvalidSpec,
              "unit plan channel chain is broken at unit " + std::to_string(i));
    }
  }
  require(tau > 0 && tau % 2 == 1, errc::InvalidSpec, "tau must be odd and positive");
  require(num_classes >= 1, errc::UnknownClassCount, "num_classes must be >= 1");
  require(bodies >= 1, errc::InvalidSpec, "bodies must be >= 1");
  require(frames >= 1, errc::InvalidSpec, "frames must be >= 1");
  require(self_loop_weight >= 0.0, errc::InvalidSpec,
          "self_loop_weight must be non-negative");
}

namespace {

std::string plan_string(const std::vector<UnitPlanEntry>& plan) {
  std::ostringstream ss;
  for (size_t i = 0; i < plan.size(); ++i) {
    if (i) ss << "|";
    ss << plan[i].in_channels << ":" << plan[i].out_channels << ":" << plan[i].stride;
  }
  return ss.str();
}

template <class S>
TensorT<S> uniform_init(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
  TensorT<S> t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data) v = static_cast<S>(dist(rng));
  return t;
}

template <class S>
TensorT<S> ones(std::vector<int> shape) {
  TensorT<S> t(std::move(shape));
  t.fill(S(1));
  return t;
}

}  // namespace

template <class S>
ModelT<S>::ModelT(const NetworkConfig& cfg, const SkeletonGraph& graph,
                  const PartitionScheme& scheme, uint64_t seed)
    : cfg_(cfg), scheme_(scheme), num_vertices_(graph.num_vertices()) {
  cfg_.scheme_name = scheme.name();
  cfg_.validate();
  require(cfg_.signal != SignalTag::Activation, errc::InvalidSpec,
          "model input signal must be a concrete signal tag");
  input_channels_ = signal_channels(cfg_.signal,
                                    static_cast<int>(graph.reference_joints().size()));
  require(input_channels_ > 0, errc::InvalidSpec,
          "signal needs reference joints but the topology declares none");

  for (int p = 0; p < scheme_.part_count(); ++p) {
    NormalizedAdjacency norm = normalize_adjacency(scheme_.part(p), p);
    TensorT<S> op({norm.size, norm.size});
    for (int i = 0; i < norm.size; ++i) {
      for (int j = 0; j < norm.size; ++j) {
        double v = norm.at(i, j) + (i == j ? cfg_.self_loop_weight : 0.0);
        op.data[static_cast<size_t>(i) * norm.size + j] = static_cast<S>(v);
      }
    }
    a_hat_.push_back(std::move(op));
  }

  input_mean_.assign(input_channels_, 0.0);
  input_std_.assign(input_channels_, 1.0);

  std::ostringstream echo;
  echo << "pbgcn-v1"
       << ";scheme=" << scheme_.name() << ";signal=" << signal_name(cfg_.signal)
       << ";tau=" << cfg_.tau << ";plan=" << plan_string(cfg_.plan)
       << ";classes=" << cfg_.num_classes << ";self_loop=" << cfg_.self_loop_weight
       << ";bodies=" << cfg_.bodies << ";frames=" << cfg_.frames
       << ";share_w=" << (cfg_.share_part_weights ? 1 : 0)
       << ";pad=zero"
       << ";graph=" << std::hex << graph.fingerprint()
       << ";parts=" << scheme_.fingerprint();
  echo_ = echo.str();

  init_parameters(seed);
}

template <class S>
void ModelT<S>::init_parameters(uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = scheme_.part_count();
  const int c0 = cfg_.plan.front().in_channels;

  head_transform_ = ParameterT<S>(
      "head.w", uniform_init<S>({c0, input_channels_}, input_channels_, rng));

  units_.clear();
  for (size_t u = 0; u < cfg_.plan.size(); ++u) {
    const auto& entry = cfg_.plan[u];
    STUnitParamsT<S> unit;
    unit.stride = entry.stride;
    const std::string prefix = "unit" + std::to_string(u);
    const int transforms = cfg_.share_part_weights ? 1 : n;
    for (int p = 0; p < transforms; ++p) {
      unit.part_transforms.emplace_back(
          prefix + ".part" + std::to_string(p) + ".w",
          uniform_init<S>({entry.out_channels, entry.in_channels}, entry.in_channels,
                          rng));
    }
    for (int p = 0; p < n; ++p) {
      const int vp = static_cast<int>(scheme_.part(p).vertices.size());
      ParameterT<S> mask(prefix + ".mask" + std::to_string(p), ones<S>({vp, vp}));
      mask.apply_decay = false;
      unit.edge_masks.push_back(std::move(mask));
    }
    unit.agg_weights = ParameterT<S>(prefix + ".agg", ones<S>({n}));
    unit.agg_weights.apply_decay = false;
    unit.temporal_kernel = ParameterT<S>(
        prefix + ".wt",
        uniform_init<S>({entry.out_channels, entry.out_channels, cfg_.tau},
                        entry.out_channels * cfg_.tau, rng));
    if (entry.in_channels != entry.out_channels || entry.stride != 1) {
      unit.residual_proj = ParameterT<S>(
          prefix + ".res",
          uniform_init<S>({entry.out_channels, entry.in_channels, 1}, entry.in_channels,
                          rng));
    }
    units_.push_back(std::move(unit));
  }

  const int c_last = cfg_.plan.back().out_channels;
  classifier_weight_ = ParameterT<S>(
      "fc.w", uniform_init<S>({cfg_.num_classes, c_last}, c_last, rng));
  classifier_bias_ = ParameterT<S>("fc.b", TensorT<S>::zeros({cfg_.num_classes}));
}

template <class S>
std::vector<ParameterT<S>*> ModelT<S>::parameters() {
  std::vector<ParameterT<S>*> out;
  out.push_back(&head_transform_);
  for (auto& u : units_) {
    for (auto& w : u.part_transforms) out.push_back(&w);
    for (auto& m : u.edge_masks) out.push_back(&m);
    out.push_back(&u.agg_weights);
    out.push_back(&u.temporal_kernel);
    if (u.residual_proj) out.push_back(&*u.residual_proj);
  }
  out.push_back(&classifier_weight_);
  out.push_back(&classifier_bias_);
  return out;
}

template <class S>
std::vector<const ParameterT<S>*> ModelT<S>::parameters() const {
  auto mut = const_cast<ModelT*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

template <class S>
void ModelT<S>::set_standardization(std::vector<double> mean, std::vector<double> stddev) {
  require(static_cast<int>(mean.size()) == input_channels_ &&
              static_cast<int>(stddev.size()) == input_channels_,
          errc::ShapeMismatch, "standardization stats must match input channels");
  for (double s : stddev) {
    require(s > 0.0, errc::InvalidSpec, "standardization std must be positive");
  }
  input_mean_ = std::move(mean);
  input_std_ = std::move(stddev);
}

template <class S>
std::vector<S> ModelT<S>::body_weights(const FeatureTensor& input) const {
  std::vector<S> w(input.bodies, S(0));
  S total = 0;
  for (int m = 0; m < input.bodies; ++m) {
    if (m < static_cast<int>(input.body_valid.size()) && input.body_valid[m]) {
      w[m] = S(1);
      total += S(1);
    }
  }
  // Hand-built feature tensors may not set validity; treat all as valid.
  if (total == S(0)) std::fill(w.begin(), w.end(), S(1));
  return w;
}

template <class S>
typename ModelT<S>::Id ModelT<S>::input_node(TapeType& tape,
                                             const FeatureTensor& input) const {
  require(input.channels == input_channels_, errc::ShapeMismatch,
          "input has " + std::to_string(input.channels) + " channels, model expects " +
              std::to_string(input_channels_));
  require(input.joints == num_vertices_, errc::ShapeMismatch,
          "input vertex count does not match the topology");
  require(input.bodies >= 1 && input.frames >= 1, errc::ShapeMismatch,
          "input must have at least one frame and one body");

  TensorT<S> x({input.channels, input.frames, input.joints, input.bodies});
  const long long per_channel =
      static_cast<long long>(input.frames) * input.joints * input.bodies;
  for (int c = 0; c < input.channels; ++c) {
    const double mu = input_mean_[c];
    const double inv = 1.0 / input_std_[c];
    const double* src = input.data.data() + static_cast<size_t>(c) * per_channel;
    S* dst = x.ptr() + static_cast<size_t>(c) * per_channel;
    for (long long i = 0; i < per_channel; ++i) {
      dst[i] = static_cast<S>((src[i] - mu) * inv);
    }
  }
  return tape.constant(std::move(x));
}

template <class S>
std::vector<typename ModelT<S>::Id> ModelT<S>::spatial_part_conv(TapeType& tape, Id x,
                                                                 int unit) const {
  const STUnitParamsT<S>& u = units_.at(unit);
  std::vector<Id> out;
  for (int p = 0; p < scheme_.part_count(); ++p) {
    const Part& part = scheme_.part(p);
    Id xp = tape.gather_vertices(x, part.vertices);
    const int widx = cfg_.share_part_weights ? 0 : p;
    Id zp = tape.matmul(tape.param(const_cast<ParameterT<S>&>(u.part_transforms[widx])),
                        xp);
    Id op = tape.mul(tape.constant(a_hat_[p]),
                     tape.param(const_cast<ParameterT<S>&>(u.edge_masks[p])));
    out.push_back(tape.graph_mix(zp, op));
  }
  return out;
}

template <class S>
typename ModelT<S>::Id ModelT<S>::aggregate_parts(TapeType& tape,
                                                  const std::vector<Id>& part_outputs,
                                                  int unit) const {
  require(static_cast<int>(part_outputs.size()) == scheme_.part_count(),
          errc::ShapeMismatch, "one output per part expected");
  const STUnitParamsT<S>& u = units_.at(unit);
  Id agg_param = tape.param(const_cast<ParameterT<S>&>(u.agg_weights));
  Id acc = -1;
  for (int p = 0; p < scheme_.part_count(); ++p) {
    Id scattered =
        tape.scatter_vertices(part_outputs[p], scheme_.part(p).vertices, num_vertices_);
    Id term = tape.scale_by_entry(scattered, agg_param, p);
    acc = (p == 0) ? term : tape.add(acc, term);
  }
  return acc;
}

template <class S>
typename ModelT<S>::Id ModelT<S>::cross_part_edge_aggregate(
    TapeType& tape, const std::vector<Id>& part_outputs, int unit) const {
  Id acc = aggregate_parts(tape, part_outputs, unit);
  if (scheme_.cross_edges().empty()) return acc;

  const STUnitParamsT<S>& u = units_.at(unit);
  Id agg_param = tape.param(const_cast<ParameterT<S>&>(u.agg_weights));
  // Each cross edge feeds the neighbor's part output to the other endpoint,
  // in both directions, weighted by the contributing part's weight.
  auto contribute = [&](int src_part, int src_vertex, int dst_vertex) {
    int local = scheme_.part(src_part).local_index(src_vertex);
    Id g = tape.gather_vertices(part_outputs[src_part], {local});
    Id s = tape.scatter_vertices(g, {dst_vertex}, num_vertices_);
    acc = tape.add(acc, tape.scale_by_entry(s, agg_param, src_part));
  };
  for (const CrossEdge& ce : scheme_.cross_edges()) {
    contribute(ce.part_b, ce.vertex_b, ce.vertex_a);
    contribute(ce.part_a, ce.vertex_a, ce.vertex_b);
  }
  return acc;
}

template <class S>
typename ModelT<S>::Id ModelT<S>::st_unit_forward(TapeType& tape, Id x, int unit) const {
  const STUnitParamsT<S>& u = units_.at(unit);
  const UnitPlanEntry& entry = cfg_.plan.at(unit);

  std::vector<Id> parts = spatial_part_conv(tape, x, unit);
  Id agg = scheme_.cross_edges().empty()
               ? aggregate_parts(tape, parts, unit)
               : cross_part_edge_aggregate(tape, parts, unit);
  Id spatial = tape.relu(agg);
  Id temporal = tape.temporal_conv(
      spatial, tape.param(const_cast<ParameterT<S>&>(u.temporal_kernel)), u.stride);

  Id residual;
  if (entry.in_channels == entry.out_channels && u.stride == 1) {
    residual = x;
  } else {
    require(u.residual_proj.has_value(), errc::ShapeMismatch,
            "unit needs a residual projection");
    residual = tape.temporal_conv(
        x, tape.param(const_cast<ParameterT<S>&>(*u.residual_proj)), u.stride);
  }
  return tape.relu(tape.add(temporal, residual));
}

template <class S>
typename ModelT<S>::Id ModelT<S>::forward(TapeType& tape,
                                          const FeatureTensor& input) const {
  Id x = input_node(tape, input);
  x = tape.matmul(tape.param(const_cast<ParameterT<S>&>(head_transform_)), x);
  for (int u = 0; u < unit_count(); ++u) {
    x = st_unit_forward(tape, x, u);
  }
  Id pooled = tape.global_pool(x, body_weights(input));
  Id scores = tape.matmul(
      tape.param(const_cast<ParameterT<S>&>(classifier_weight_)), pooled);
  return tape.add(scores, tape.param(const_cast<ParameterT<S>&>(classifier_bias_)));
}

template <class S>
std::vector<double> ModelT<S>::logits(const FeatureTensor& input) const {
  TapeType tape;
  Id out = forward(tape, input);
  const TensorT<S>& v = tape.value(out);
  return {v.data.begin(), v.data.end()};
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(in.good(), errc::IOError, "checkpoint file truncated");
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  uint64_t len = read_pod<uint64_t>(in);
  require(len < (1u << 20), errc::IOError, "checkpoint string length implausible");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  require(in.good(), errc::IOError, "checkpoint file truncated");
  return s;
}

constexpr uint32_t kCheckpointMagic = 0x4b434250;  // "PBCK"
constexpr uint32_t kCheckpointVersion = 1;

}  // namespace

template <class S>
void ModelT<S>::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), errc::IOError, "cannot write checkpoint '" + path + "'");
  write_pod<uint32_t>(out, kCheckpointMagic);
  write_pod<uint32_t>(out, kCheckpointVersion);
  write_string(out, echo_);
  write_pod<double>(out, cfg_.self_loop_weight);
  write_pod<uint8_t>(out, 0);  // temporal padding mode: 0 = zero padding
  write_pod<uint32_t>(out, static_cast<uint32_t>(input_channels_));
  for (double v : input_mean_) write_pod<double>(out, v);
  for (double v : input_std_) write_pod<double>(out, v);

  auto params = parameters();
  write_pod<uint32_t>(out, static_cast<uint32_t>(params.size()));
  for (const ParameterT<S>* p : params) {
    write_string(out, p->name);
    write_pod<uint8_t>(out, static_cast<uint8_t>(p->value.rank()));
    for (int d : p->value.shape) write_pod<uint32_t>(out, static_cast<uint32_t>(d));
    for (S v : p->value.data) write_pod<double>(out, static_cast<double>(v));
  }
  require(out.good(), errc::IOError, "failed writing checkpoint '" + path + "'");
}

template <class S>
void ModelT<S>::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), errc::IOError, "cannot open checkpoint '" + path + "'");
  require(read_pod<uint32_t>(in) == kCheckpointMagic, errc::ConfigMismatch,
          "'" + path + "' is not a checkpoint file");
  require(read_pod<uint32_t>(in) == kCheckpointVersion, errc::ConfigMismatch,
          "unsupported checkpoint version");
  std::string echo = read_string(in);
  require(echo == echo_, errc::ConfigMismatch,
          "checkpoint was trained with a different configuration:\n  file:  " + echo +
              "\n  model: " + echo_);
  (void)read_pod<double>(in);   // self-loop weight, already covered by the echo
  (void)read_pod<uint8_t>(in);  // padding mode
  uint32_t channels = read_pod<uint32_t>(in);
  require(static_cast<int>(channels) == input_channels_, errc::ConfigMismatch,
          "checkpoint input channel count mismatch");
  std::vector<double> mean(channels), stddev(channels);
  for (auto& v : mean) v = read_pod<double>(in);
  for (auto& v : stddev) v = read_pod<double>(in);
  set_standardization(std::move(mean), std::move(stddev));

  auto params = parameters();
  uint32_t count = read_pod<uint32_t>(in);
  require(count == params.size(), errc::ConfigMismatch,
          "checkpoint parameter count mismatch");
  for (ParameterT<S>* p : params) {
    std::string name = read_string(in);
    require(name == p->name, errc::ConfigMismatch,
            "checkpoint parameter order mismatch: expected '" + p->name + "', found '" +
                name + "'");
    uint8_t rank = read_pod<uint8_t>(in);
    require(rank == p->value.rank(), errc::ConfigMismatch,
            "checkpoint shape mismatch for '" + name + "'");
    for (int d : p->value.shape) {
      require(read_pod<uint32_t>(in) == static_cast<uint32_t>(d), errc::ConfigMismatch,
              "checkpoint shape mismatch for '" + name + "'");
    }
    for (auto& v : p->value.data) v = static_cast<S>(read_pod<double>(in));
    p->velocity.fill(S(0));
    p->zero_grad();
  }
}

template class ModelT<float>;
template class ModelT<double>;

}  // namespace pbgcn
