#ifndef PBGCN_GRAPH_HPP
#define PBGCN_GRAPH_HPP

#include <string>
#include <utility>
#include <vector>

#include "pbgcn/errors.hpp"

namespace pbgcn {

/// Undirected skeleton topology. Immutable after construction; construction
/// validates that edges are in range, deduplicated, loop-free and that the
/// graph is connected (shortest-path distance must exist between all pairs).
class SkeletonGraph {
 public:
  SkeletonGraph(int num_vertices, std::vector<std::pair<int, int>> edges,
                std::vector<std::string> joint_names = {},
                std::vector<int> reference_joints = {});

  int num_vertices() const { return num_vertices_; }
  /// Edges normalized to (min,max), sorted lexicographically.
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<std::string>& joint_names() const { return joint_names_; }
  const std::vector<int>& reference_joints() const { return reference_joints_; }
  const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }
  bool has_edge(int a, int b) const;

  /// Stable fingerprint of (V, edge set), used in checkpoint config echoes.
  uint64_t fingerprint() const;

 private:
  int num_vertices_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::string> joint_names_;
  std::vector<int> reference_joints_;
  std::vector<std::vector<int>> neighbors_;
};

/// One subgraph of a partition scheme. Vertices are global indices into the
/// parent graph, sorted ascending; that order fixes the row/column order of
/// the part's adjacency operator.
struct Part {
  std::string name;
  std::vector<int> vertices;
  std::vector<std::pair<int, int>> edges;  // induced, global indices

  /// Position of a global vertex in `vertices`, -1 if absent.
  int local_index(int global_vertex) const;
  bool contains(int global_vertex) const { return local_index(global_vertex) >= 0; }
};

/// Edge connecting two distinct parts; used only by schemes that aggregate
/// across part boundaries instead of (or in addition to) shared vertices.
struct CrossEdge {
  int part_a = 0;
  int vertex_a = 0;  // global index, must lie in part_a
  int part_b = 0;
  int vertex_b = 0;
};

/// Parsed description of a partition scheme, prior to validation.
struct PartitionSpec {
  struct PartSpec {
    std::string name;
    std::vector<int> vertices;
    std::vector<std::string> adjacent_to;
  };
  std::string name;  // "one", "two", "four", "six" or custom
  std::vector<PartSpec> parts;
  std::vector<std::pair<int, int>> cross_edges;  // global vertex pairs
};

class PartitionScheme {
 public:
  PartitionScheme(std::string name, std::vector<Part> parts,
                  std::vector<std::pair<int, int>> adjacent_pairs,
                  std::vector<CrossEdge> cross_edges = {});

  const std::string& name() const { return name_; }
  int part_count() const { return static_cast<int>(parts_.size()); }
  const Part& part(int p) const { return parts_.at(p); }
  const std::vector<Part>& parts() const { return parts_; }
  /// Declared-adjacent part index pairs (each shares >= 1 vertex).
  const std::vector<std::pair<int, int>>& adjacent_pairs() const { return adjacent_pairs_; }
  const std::vector<CrossEdge>& cross_edges() const { return cross_edges_; }

  /// Vertices belonging to more than one part, with the owning part indices.
  std::vector<std::pair<int, std::vector<int>>> shared_vertices() const;

  uint64_t fingerprint() const;

 private:
  std::string name_;
  std::vector<Part> parts_;
  std::vector<std::pair<int, int>> adjacent_pairs_;
  std::vector<CrossEdge> cross_edges_;
};

/// Builds and validates a partition scheme against a graph. Every vertex and
/// every edge of the graph must be covered by some part (cross edges count as
/// covered), each part must induce a connected subgraph, and each declared
/// adjacency must share at least one vertex. Invalid schemes are rejected,
/// never repaired.
PartitionScheme build_partition(const SkeletonGraph& graph, const PartitionSpec& spec);

/// Symmetrically normalized part adjacency D^{-1/2} A D^{-1/2} with zero
/// diagonal; degrees are counted within the part only. Row/column order
/// follows the part's vertex order. Spectral radius <= 1 by construction and
/// asserted against 1 + 1e-9.
struct NormalizedAdjacency {
  int part_index = 0;
  int size = 0;
  std::vector<double> values;  // row-major size*size

  double at(int i, int j) const { return values[static_cast<size_t>(i) * size + j]; }
};

NormalizedAdjacency normalize_adjacency(const Part& part, int part_index = 0);

/// 1-neighborhood of v within the part: v itself plus its within-part edge
/// neighbors. Returned sorted ascending (global indices).
std::vector<int> spatial_neighborhood(const Part& part, int vertex);

/// Frames within floor(tau/2) of t_a, clipped to [0, T). tau must be odd.
std::vector<int> temporal_neighborhood(int t_a, int tau, int frames);

/// Receptive-field labelings: all spatial neighbors share label 0; temporal
/// neighbors get one label per frame offset.
struct LabelingFunctions {
  explicit LabelingFunctions(int tau);

  int tau() const { return tau_; }
  int spatial_label_count() const { return 1; }
  int temporal_label_count() const { return tau_; }

  int spatial_label(int /*vertex*/) const { return 0; }
  /// Maps offset t_b - t_a in [-tau/2, tau/2] onto [0, tau).
  int temporal_label(int frame_offset) const;

 private:
  int tau_;
};

/// Eigenvalues of a symmetric n*n matrix (row-major), ascending. Cyclic
/// Jacobi; intended for the small matrices that arise from skeleton parts.
std::vector<double> symmetric_eigenvalues(std::vector<double> matrix, int n);

}  // namespace pbgcn

#endif
