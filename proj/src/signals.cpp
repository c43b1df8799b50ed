#include "pbgcn/signals.hpp"

#include <algorithm>
#include <cmath>

namespace pbgcn {

const char* signal_name(SignalTag tag) {
  switch (tag) {
    case SignalTag::JLoc: return "jloc";
    case SignalTag::DR: return "dr";
    case SignalTag::DT: return "dt";
    case SignalTag::DRDT: return "dr_dt";
    case SignalTag::Activation: return "activation";
  }
  return "unknown";
}

SignalTag signal_from_name(const std::string& name) {
  if (name == "jloc") return SignalTag::JLoc;
  if (name == "dr") return SignalTag::DR;
  if (name == "dt") return SignalTag::DT;
  if (name == "dr_dt") return SignalTag::DRDT;
  fail(errc::ConfigParseError, "unknown signal '" + name + "'");
}

int signal_channels(SignalTag tag, int num_reference_joints) {
  switch (tag) {
    case SignalTag::JLoc: return 3;
    case SignalTag::DR: return 3 * num_reference_joints;
    case SignalTag::DT: return 3;
    case SignalTag::DRDT: return 3 * num_reference_joints + 3;
    case SignalTag::Activation: return -1;
  }
  return -1;
}

void SkeletonSequence::validate() const {
  require(frames >= 1 && joints >= 1, errc::ShapeMismatch,
          "sequence needs at least one frame and one joint");
  require(!bodies.empty(), errc::ShapeMismatch, "sequence has no bodies");
  const size_t expect = static_cast<size_t>(frames) * joints * 3;
  for (const auto& b : bodies) {
    require(b.size() == expect, errc::ShapeMismatch,
            "body coordinate block has wrong length");
    for (double v : b) {
      require(std::isfinite(v), errc::NonFiniteCoordinate,
              "sequence contains a non-finite coordinate");
    }
  }
}

FeatureTensor FeatureTensor::zeros(SignalTag tag, int c, int t, int v, int m) {
  FeatureTensor out;
  out.tag = tag;
  out.channels = c;
  out.frames = t;
  out.joints = v;
  out.bodies = m;
  out.data.assign(static_cast<size_t>(c) * t * v * m, 0.0);
  out.body_valid.assign(m, 0);
  return out;
}

namespace {

// Copies validity flags: bodies present in the sequence are valid, padded
// slots stay zero-filled and invalid. Extra source bodies beyond num_bodies
// are dropped.
void mark_valid(FeatureTensor& f, const SkeletonSequence& seq) {
  for (int m = 0; m < f.bodies; ++m) {
    f.body_valid[m] = m < static_cast<int>(seq.bodies.size()) ? 1 : 0;
  }
}

}  // namespace

FeatureTensor absolute_locations(const SkeletonSequence& seq, int num_bodies) {
  require(num_bodies >= 1, errc::ShapeMismatch, "num_bodies must be positive");
  FeatureTensor out = FeatureTensor::zeros(SignalTag::JLoc, 3, seq.frames, seq.joints,
                                           num_bodies);
  mark_valid(out, seq);
  const int used = std::min<int>(num_bodies, static_cast<int>(seq.bodies.size()));
  for (int m = 0; m < used; ++m) {
    for (int t = 0; t < seq.frames; ++t) {
      for (int v = 0; v < seq.joints; ++v) {
        for (int k = 0; k < 3; ++k) out.at(k, t, v, m) = seq.at(m, t, v, k);
      }
    }
  }
  return out;
}

FeatureTensor compute_relative_coords(const SkeletonSequence& seq,
                                      const std::vector<int>& reference_joints,
                                      int num_bodies) {
  require(!reference_joints.empty(), errc::EmptyReferenceSet,
          "relative coordinates need at least one reference joint");
  for (int r : reference_joints) {
    require(r >= 0 && r < seq.joints, errc::ShapeMismatch,
            "reference joint " + std::to_string(r) + " out of range");
  }
  const int blocks = static_cast<int>(reference_joints.size());
  FeatureTensor out = FeatureTensor::zeros(SignalTag::DR, 3 * blocks, seq.frames,
                                           seq.joints, num_bodies);
  mark_valid(out, seq);
  const int used = std::min<int>(num_bodies, static_cast<int>(seq.bodies.size()));
  for (int m = 0; m < used; ++m) {
    for (int b = 0; b < blocks; ++b) {
      const int r = reference_joints[b];
      for (int t = 0; t < seq.frames; ++t) {
        for (int v = 0; v < seq.joints; ++v) {
          for (int k = 0; k < 3; ++k) {
            out.at(3 * b + k, t, v, m) = seq.at(m, t, v, k) - seq.at(m, t, r, k);
          }
        }
      }
    }
  }
  return out;
}

FeatureTensor compute_temporal_displacements(const SkeletonSequence& seq,
                                             int num_bodies) {
  require(seq.frames >= 1, errc::ShapeMismatch, "sequence has no frames");
  FeatureTensor out =
      FeatureTensor::zeros(SignalTag::DT, 3, seq.frames, seq.joints, num_bodies);
  mark_valid(out, seq);
  const int used = std::min<int>(num_bodies, static_cast<int>(seq.bodies.size()));
  for (int m = 0; m < used; ++m) {
    for (int t = 0; t + 1 < seq.frames; ++t) {
      for (int v = 0; v < seq.joints; ++v) {
        for (int k = 0; k < 3; ++k) {
          out.at(k, t, v, m) = seq.at(m, t + 1, v, k) - seq.at(m, t, v, k);
        }
      }
    }
    // last frame stays zero
  }
  return out;
}

FeatureTensor concat_signals(const FeatureTensor& a, const FeatureTensor& b) {
  require(a.frames == b.frames && a.joints == b.joints && a.bodies == b.bodies,
          errc::ShapeMismatch, "concat_signals needs matching T, V, M");
  FeatureTensor out = FeatureTensor::zeros(SignalTag::DRDT, a.channels + b.channels,
                                           a.frames, a.joints, a.bodies);
  out.body_valid = a.body_valid;
  for (int m = 0; m < a.bodies; ++m) {
    if (!out.body_valid[m] && b.body_valid[m]) out.body_valid[m] = 1;
  }
  for (int c = 0; c < a.channels; ++c) {
    for (int t = 0; t < a.frames; ++t)
      for (int v = 0; v < a.joints; ++v)
        for (int m = 0; m < a.bodies; ++m) out.at(c, t, v, m) = a.at(c, t, v, m);
  }
  for (int c = 0; c < b.channels; ++c) {
    for (int t = 0; t < b.frames; ++t)
      for (int v = 0; v < b.joints; ++v)
        for (int m = 0; m < b.bodies; ++m)
          out.at(a.channels + c, t, v, m) = b.at(c, t, v, m);
  }
  return out;
}

FeatureTensor compute_signal(const SkeletonSequence& seq, SignalTag tag,
                             const std::vector<int>& reference_joints,
                             int num_bodies) {
  switch (tag) {
    case SignalTag::JLoc:
      return absolute_locations(seq, num_bodies);
    case SignalTag::DR:
      return compute_relative_coords(seq, reference_joints, num_bodies);
    case SignalTag::DT:
      return compute_temporal_displacements(seq, num_bodies);
    case SignalTag::DRDT:
      return concat_signals(compute_relative_coords(seq, reference_joints, num_bodies),
                            compute_temporal_displacements(seq, num_bodies));
    case SignalTag::Activation:
      break;
  }
  fail(errc::InvalidSpec, "cannot compute an 'activation' signal from a sequence");
}

}  // namespace pbgcn
