#include "pbgcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>

namespace pbgcn {

namespace {

uint64_t fnv1a(uint64_t h, uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (i * 8)) & 0xffu;
    h *= 1099511628211ull;
  }
  return h;
}

constexpr uint64_t kFnvInit = 1469598103934665603ull;

// Connected-component check over an induced vertex set given a neighbor
// lookup; vertices are global ids.
bool connected_within(const std::vector<int>& vertices,
                      const std::vector<std::pair<int, int>>& edges) {
  if (vertices.empty()) return false;
  if (vertices.size() == 1) return true;
  std::map<int, std::vector<int>> adj;
  for (int v : vertices) adj[v];
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::set<int> seen{vertices.front()};
  std::vector<int> stack{vertices.front()};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (seen.insert(w).second) stack.push_back(w);
    }
  }
  return seen.size() == vertices.size();
}

}  // namespace

SkeletonGraph::SkeletonGraph(int num_vertices, std::vector<std::pair<int, int>> edges,
                             std::vector<std::string> joint_names,
                             std::vector<int> reference_joints)
    : num_vertices_(num_vertices),
      joint_names_(std::move(joint_names)),
      reference_joints_(std::move(reference_joints)) {
  require(num_vertices_ > 0, errc::InvalidGraph, "graph needs at least one vertex");
  for (auto& [a, b] : edges) {
    require(a != b, errc::InvalidGraph,
            "self-loop edge at vertex " + std::to_string(a));
    require(a >= 0 && a < num_vertices_ && b >= 0 && b < num_vertices_,
            errc::InvalidGraph, "edge endpoint out of range");
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  auto dup = std::adjacent_find(edges.begin(), edges.end());
  require(dup == edges.end(), errc::InvalidGraph, "duplicate edge in edge list");
  edges_ = std::move(edges);

  if (!joint_names_.empty()) {
    require(static_cast<int>(joint_names_.size()) == num_vertices_, errc::InvalidGraph,
            "joint_names length must equal vertex count");
  }
  std::set<int> ref_seen;
  for (int r : reference_joints_) {
    require(r >= 0 && r < num_vertices_, errc::InvalidGraph,
            "reference joint " + std::to_string(r) + " out of range");
    require(ref_seen.insert(r).second, errc::InvalidGraph,
            "duplicate reference joint " + std::to_string(r));
  }

  neighbors_.assign(num_vertices_, {});
  for (const auto& [a, b] : edges_) {
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
  }
  for (auto& n : neighbors_) std::sort(n.begin(), n.end());

  std::vector<int> all(num_vertices_);
  for (int v = 0; v < num_vertices_; ++v) all[v] = v;
  require(connected_within(all, edges_), errc::InvalidGraph,
          "graph must be connected");
}

bool SkeletonGraph::has_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  return std::binary_search(edges_.begin(), edges_.end(), std::make_pair(a, b));
}

uint64_t SkeletonGraph::fingerprint() const {
  uint64_t h = fnv1a(kFnvInit, static_cast<uint64_t>(num_vertices_));
  for (const auto& [a, b] : edges_) {
    h = fnv1a(h, static_cast<uint64_t>(a));
    h = fnv1a(h, static_cast<uint64_t>(b));
  }
  return h;
}

int Part::local_index(int global_vertex) const {
  auto it = std::lower_bound(vertices.begin(), vertices.end(), global_vertex);
  if (it == vertices.end() || *it != global_vertex) return -1;
  return static_cast<int>(it - vertices.begin());
}

PartitionScheme::PartitionScheme(std::string name, std::vector<Part> parts,
                                 std::vector<std::pair<int, int>> adjacent_pairs,
                                 std::vector<CrossEdge> cross_edges)
    : name_(std::move(name)),
      parts_(std::move(parts)),
      adjacent_pairs_(std::move(adjacent_pairs)),
      cross_edges_(std::move(cross_edges)) {
  require(!parts_.empty(), errc::InvalidGraph, "partition scheme needs n >= 1 parts");
}

std::vector<std::pair<int, std::vector<int>>> PartitionScheme::shared_vertices() const {
  std::map<int, std::vector<int>> owners;
  for (int p = 0; p < part_count(); ++p) {
    for (int v : parts_[p].vertices) owners[v].push_back(p);
  }
  std::vector<std::pair<int, std::vector<int>>> out;
  for (auto& [v, ps] : owners) {
    if (ps.size() > 1) out.emplace_back(v, ps);
  }
  return out;
}

uint64_t PartitionScheme::fingerprint() const {
  uint64_t h = kFnvInit;
  for (char c : name_) h = fnv1a(h, static_cast<uint64_t>(c));
  for (const auto& part : parts_) {
    h = fnv1a(h, part.vertices.size());
    for (int v : part.vertices) h = fnv1a(h, static_cast<uint64_t>(v));
  }
  for (const auto& ce : cross_edges_) {
    h = fnv1a(h, static_cast<uint64_t>(ce.vertex_a));
    h = fnv1a(h, static_cast<uint64_t>(ce.vertex_b));
  }
  return h;
}

PartitionScheme build_partition(const SkeletonGraph& graph, const PartitionSpec& spec) {
  require(!spec.parts.empty(), errc::InvalidGraph, "scheme declares no parts");

  std::vector<Part> parts;
  std::map<std::string, int> index_of;
  for (const auto& ps : spec.parts) {
    Part part;
    part.name = ps.name;
    part.vertices = ps.vertices;
    std::sort(part.vertices.begin(), part.vertices.end());
    part.vertices.erase(std::unique(part.vertices.begin(), part.vertices.end()),
                        part.vertices.end());
    require(!part.vertices.empty(), errc::InvalidGraph,
            "part '" + ps.name + "' has no vertices");
    require(part.vertices.size() == ps.vertices.size(), errc::InvalidGraph,
            "part '" + ps.name + "' lists a vertex twice");
    for (int v : part.vertices) {
      require(v >= 0 && v < graph.num_vertices(), errc::InvalidGraph,
              "part '" + ps.name + "' vertex " + std::to_string(v) + " out of range");
    }
    // Induced edge set.
    for (const auto& [a, b] : graph.edges()) {
      if (part.contains(a) && part.contains(b)) part.edges.emplace_back(a, b);
    }
    require(connected_within(part.vertices, part.edges), errc::DisconnectedPart,
            "part '" + ps.name + "' does not induce a connected subgraph");
    require(index_of.emplace(ps.name, static_cast<int>(parts.size())).second,
            errc::InvalidGraph, "duplicate part name '" + ps.name + "'");
    parts.push_back(std::move(part));
  }

  // Cross edges must be real graph edges joining two distinct parts.
  std::vector<CrossEdge> cross;
  for (auto [a, b] : spec.cross_edges) {
    require(graph.has_edge(a, b), errc::InvalidGraph,
            "cross edge (" + std::to_string(a) + "," + std::to_string(b) +
                ") is not a graph edge");
    int pa = -1, pb = -1;
    for (int p = 0; p < static_cast<int>(parts.size()); ++p) {
      if (parts[p].contains(a) && pa < 0) pa = p;
      if (parts[p].contains(b) && pb < 0) pb = p;
    }
    require(pa >= 0 && pb >= 0 && pa != pb, errc::InvalidGraph,
            "cross edge endpoints must lie in two distinct parts");
    cross.push_back({pa, a, pb, b});
  }

  // Eq.-level coverage: union of part vertex sets is V, union of part edge
  // sets (plus declared cross edges) is E.
  std::vector<char> covered(graph.num_vertices(), 0);
  for (const auto& part : parts) {
    for (int v : part.vertices) covered[v] = 1;
  }
  for (int v = 0; v < graph.num_vertices(); ++v) {
    require(covered[v], errc::UncoveredVertex,
            "vertex " + std::to_string(v) + " is not covered by any part");
  }
  std::set<std::pair<int, int>> edge_cover;
  for (const auto& part : parts) {
    for (auto e : part.edges) edge_cover.insert(e);
  }
  for (const auto& ce : cross) {
    int a = std::min(ce.vertex_a, ce.vertex_b), b = std::max(ce.vertex_a, ce.vertex_b);
    edge_cover.insert({a, b});
  }
  for (const auto& e : graph.edges()) {
    require(edge_cover.count(e) != 0, errc::UncoveredEdge,
            "edge (" + std::to_string(e.first) + "," + std::to_string(e.second) +
                ") is not covered by any part");
  }

  // Declared part adjacency: overlap of at least one joint.
  std::vector<std::pair<int, int>> adj_pairs;
  for (size_t p = 0; p < spec.parts.size(); ++p) {
    for (const auto& other : spec.parts[p].adjacent_to) {
      auto it = index_of.find(other);
      require(it != index_of.end(), errc::InvalidGraph,
              "part '" + spec.parts[p].name + "' declares unknown neighbor '" + other + "'");
      int q = it->second;
      require(q != static_cast<int>(p), errc::InvalidGraph,
              "part '" + spec.parts[p].name + "' declares itself adjacent");
      std::vector<int> shared;
      std::set_intersection(parts[p].vertices.begin(), parts[p].vertices.end(),
                            parts[q].vertices.begin(), parts[q].vertices.end(),
                            std::back_inserter(shared));
      require(!shared.empty(), errc::NoSharedVertex,
              "adjacent parts '" + spec.parts[p].name + "' and '" + other +
                  "' share no vertex");
      adj_pairs.emplace_back(std::min<int>(p, q), std::max<int>(p, q));
    }
  }
  std::sort(adj_pairs.begin(), adj_pairs.end());
  adj_pairs.erase(std::unique(adj_pairs.begin(), adj_pairs.end()), adj_pairs.end());

  return PartitionScheme(spec.name, std::move(parts), std::move(adj_pairs),
                         std::move(cross));
}

NormalizedAdjacency normalize_adjacency(const Part& part, int part_index) {
  const int n = static_cast<int>(part.vertices.size());
  std::vector<double> a(static_cast<size_t>(n) * n, 0.0);
  std::vector<double> degree(n, 0.0);
  for (const auto& [ga, gb] : part.edges) {
    int i = part.local_index(ga);
    int j = part.local_index(gb);
    a[static_cast<size_t>(i) * n + j] = 1.0;
    a[static_cast<size_t>(j) * n + i] = 1.0;
    degree[i] += 1.0;
    degree[j] += 1.0;
  }
  for (int i = 0; i < n; ++i) {
    require(degree[i] > 0.0, errc::ZeroDegreeVertex,
            "vertex " + std::to_string(part.vertices[i]) + " has no within-part edge" +
                (part.name.empty() ? "" : " in part '" + part.name + "'"));
  }

  NormalizedAdjacency out;
  out.part_index = part_index;
  out.size = n;
  out.values.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (a[static_cast<size_t>(i) * n + j] != 0.0) {
        out.values[static_cast<size_t>(i) * n + j] =
            1.0 / std::sqrt(degree[i] * degree[j]);
      }
    }
  }

  // Spectral sanity: eigenvalues of D^{-1/2} A D^{-1/2} lie in [-1, 1].
  auto eig = symmetric_eigenvalues(out.values, n);
  double radius = std::max(std::abs(eig.front()), std::abs(eig.back()));
  require(radius <= 1.0 + 1e-9, errc::InvalidGraph,
          "normalized adjacency spectral radius exceeds 1");
  return out;
}

std::vector<int> spatial_neighborhood(const Part& part, int vertex) {
  require(part.contains(vertex), errc::VertexNotInPart,
          "vertex " + std::to_string(vertex) + " is not in the part");
  std::set<int> out{vertex};
  for (const auto& [a, b] : part.edges) {
    if (a == vertex) out.insert(b);
    if (b == vertex) out.insert(a);
  }
  return {out.begin(), out.end()};
}

std::vector<int> temporal_neighborhood(int t_a, int tau, int frames) {
  require(tau > 0 && tau % 2 == 1, errc::InvalidSpec, "tau must be odd and positive");
  require(t_a >= 0 && t_a < frames, errc::InvalidSpec, "frame index out of range");
  const int half = tau / 2;
  std::vector<int> out;
  for (int t = std::max(0, t_a - half); t <= std::min(frames - 1, t_a + half); ++t) {
    out.push_back(t);
  }
  return out;
}

LabelingFunctions::LabelingFunctions(int tau) : tau_(tau) {
  require(tau > 0 && tau % 2 == 1, errc::InvalidSpec, "tau must be odd and positive");
}

int LabelingFunctions::temporal_label(int frame_offset) const {
  const int half = tau_ / 2;
  require(frame_offset >= -half && frame_offset <= half, errc::InvalidSpec,
          "frame offset outside temporal receptive field");
  return frame_offset + half;
}

std::vector<double> symmetric_eigenvalues(std::vector<double> m, int n) {
  require(n >= 1 && static_cast<size_t>(n) * n == m.size(), errc::ShapeMismatch,
          "matrix must be square");
  auto at = [&](int i, int j) -> double& { return m[static_cast<size_t>(i) * n + j]; };

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-24) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(at(p, q)) < 1e-18) continue;
        double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double mkp = at(k, p), mkq = at(k, q);
          at(k, p) = c * mkp - s * mkq;
          at(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          double mpk = at(p, k), mqk = at(q, k);
          at(p, k) = c * mpk - s * mqk;
          at(q, k) = s * mpk + c * mqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (int i = 0; i < n; ++i) eig[i] = at(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

}  // namespace pbgcn
