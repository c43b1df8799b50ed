#ifndef PBGCN_SIGNALS_HPP
#define PBGCN_SIGNALS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pbgcn/errors.hpp"

namespace pbgcn {

enum class SignalTag { JLoc, DR, DT, DRDT, Activation };

const char* signal_name(SignalTag tag);
SignalTag signal_from_name(const std::string& name);
/// Channel count a tag implies for a given reference-joint set size.
int signal_channels(SignalTag tag, int num_reference_joints);

/// Raw 3D joint trajectories for one recording; one coordinate block per
/// tracked body, all sharing T and V. Coordinates are finite after ingestion.
struct SkeletonSequence {
  int frames = 0;
  int joints = 0;
  std::vector<std::vector<double>> bodies;  // each frames*joints*3, (t,v,xyz)
  std::optional<int> label;
  int subject_id = -1;
  int camera_id = -1;
  int action_id = -1;

  double at(int body, int t, int v, int axis) const {
    return bodies[body][(static_cast<size_t>(t) * joints + v) * 3 + axis];
  }
  double& at(int body, int t, int v, int axis) {
    return bodies[body][(static_cast<size_t>(t) * joints + v) * 3 + axis];
  }
  void validate() const;
};

/// Dense [C x T x V x M] feature array in double precision. Bodies beyond the
/// ones present in the source sequence are zero-filled and flagged invalid so
/// pooling can skip them.
struct FeatureTensor {
  SignalTag tag = SignalTag::Activation;
  int channels = 0;
  int frames = 0;
  int joints = 0;
  int bodies = 0;
  std::vector<double> data;         // (c,t,v,m) row-major
  std::vector<uint8_t> body_valid;  // length = bodies

  static FeatureTensor zeros(SignalTag tag, int c, int t, int v, int m);

  size_t index(int c, int t, int v, int m) const {
    return ((static_cast<size_t>(c) * frames + t) * joints + v) * bodies + m;
  }
  double at(int c, int t, int v, int m) const { return data[index(c, t, v, m)]; }
  double& at(int c, int t, int v, int m) { return data[index(c, t, v, m)]; }
};

/// Raw joint locations as vertex features (3 channels).
FeatureTensor absolute_locations(const SkeletonSequence& seq, int num_bodies);

/// Relative coordinates: per reference joint r, a 3-channel block holding
/// coords(v) - coords(r) at each frame. Block order follows reference order.
/// Invariant under adding a constant offset to all joints of a frame.
FeatureTensor compute_relative_coords(const SkeletonSequence& seq,
                                      const std::vector<int>& reference_joints,
                                      int num_bodies);

/// Frame-to-frame displacements coords(t+1) - coords(t); the last frame is
/// zero-padded so T is unchanged. 3 channels.
FeatureTensor compute_temporal_displacements(const SkeletonSequence& seq,
                                             int num_bodies);

/// Channel-axis concatenation; T, V, M must match.
FeatureTensor concat_signals(const FeatureTensor& a, const FeatureTensor& b);

/// Dispatches on the tag; DRDT is compute_relative_coords || temporal
/// displacements, in that order.
FeatureTensor compute_signal(const SkeletonSequence& seq, SignalTag tag,
                             const std::vector<int>& reference_joints,
                             int num_bodies);

}  // namespace pbgcn

#endif
