#include "pbgcn/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace pbgcn {

namespace {

long long product(const std::vector<int>& shape) {
  long long n = 1;
  for (int d : shape) n *= d;
  return n;
}

}  // namespace

template <class S>
TensorT<S>::TensorT(std::vector<int> shape_in) : shape(std::move(shape_in)) {
  for (int d : shape) require(d >= 0, errc::ShapeMismatch, "negative dimension");
  data.assign(static_cast<size_t>(product(shape)), S(0));
}

template <class S>
TensorT<S>::TensorT(std::vector<int> shape_in, std::vector<S> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  require(static_cast<long long>(data.size()) == product(shape), errc::ShapeMismatch,
          "data length does not match shape");
}

template <class S>
TensorT<S> TensorT<S>::zeros(std::vector<int> shape) {
  return TensorT(std::move(shape));
}

template <class S>
TensorT<S> TensorT<S>::scalar(S v) {
  return TensorT({1}, {v});
}

template <class S>
long long TensorT<S>::numel() const {
  return product(shape);
}

template <class S>
S TensorT<S>::at(std::initializer_list<int> idx) const {
  return const_cast<TensorT*>(this)->at(idx);
}

template <class S>
S& TensorT<S>::at(std::initializer_list<int> idx) {
  require(static_cast<int>(idx.size()) == rank(), errc::ShapeMismatch,
          "index rank mismatch");
  size_t flat = 0;
  int axis = 0;
  for (int i : idx) {
    require(i >= 0 && i < shape[axis], errc::ShapeMismatch, "index out of range");
    flat = flat * shape[axis] + i;
    ++axis;
  }
  return data[flat];
}

template <class S>
void TensorT<S>::fill(S v) {
  std::fill(data.begin(), data.end(), v);
}

template <class S>
ParameterT<S>::ParameterT(std::string name_in, TensorT<S> value_in)
    : name(std::move(name_in)),
      value(std::move(value_in)),
      grad(TensorT<S>::zeros(value.shape)),
      velocity(TensorT<S>::zeros(value.shape)) {}

template <class S>
void ParameterT<S>::zero_grad() {
  grad.fill(S(0));
  grad_updates = 0;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

template <class S>
typename TapeT<S>::NodeId TapeT<S>::push(TensorT<S> value, bool needs_grad,
                                         std::function<void(TapeT&)> pull) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad;
  node.pull = std::move(pull);
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

template <class S>
TensorT<S>& TapeT<S>::grad_buf(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.data.empty() && n.value.numel() > 0) {
    n.grad = TensorT<S>::zeros(n.value.shape);
  }
  return n.grad;
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::constant(TensorT<S> v) {
  return push(std::move(v), false, nullptr);
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::param(ParameterT<S>& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return it->second;
  NodeId id = push(p.value, true, nullptr);
  nodes_[id].parameter = &p;
  param_nodes_.emplace(&p, id);
  return id;
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::matmul(NodeId w_id, NodeId x_id) {
  const TensorT<S>& w = nodes_[w_id].value;
  const TensorT<S>& x = nodes_[x_id].value;
  require(w.rank() == 2, errc::ShapeMismatch, "matmul weight must be 2-D");
  require(x.rank() >= 1, errc::ShapeMismatch, "matmul input must have rank >= 1");
  const int rows = w.dim(0), cols = w.dim(1);
  require(x.dim(0) == cols, errc::ShapeMismatch,
          "matmul inner dimensions disagree: " + std::to_string(cols) + " vs " +
              std::to_string(x.dim(0)));
  const long long n = x.numel() / cols;

  std::vector<int> out_shape = x.shape;
  out_shape[0] = rows;
  TensorT<S> y(out_shape);
  {
    const S* wp = w.ptr();
    const S* xp = x.ptr();
    S* yp = y.ptr();
    for (int r = 0; r < rows; ++r) {
      S* yrow = yp + static_cast<size_t>(r) * n;
      for (int c = 0; c < cols; ++c) {
        const S wv = wp[static_cast<size_t>(r) * cols + c];
        if (wv == S(0)) continue;
        const S* xrow = xp + static_cast<size_t>(c) * n;
        for (long long i = 0; i < n; ++i) yrow[i] += wv * xrow[i];
      }
    }
  }

  const NodeId out_id = size();
  bool ng = nodes_[w_id].needs_grad || nodes_[x_id].needs_grad;
  return push(std::move(y), ng, [out_id, w_id, x_id, rows, cols, n](TapeT& t) {
    const S* dyp = t.nodes_[out_id].grad.ptr();
    const S* wp = t.nodes_[w_id].value.ptr();
    const S* xp = t.nodes_[x_id].value.ptr();
    if (t.nodes_[w_id].needs_grad) {
      S* dwp = t.grad_buf(w_id).ptr();
      for (int r = 0; r < rows; ++r) {
        const S* dyrow = dyp + static_cast<size_t>(r) * n;
        for (int c = 0; c < cols; ++c) {
          const S* xrow = xp + static_cast<size_t>(c) * n;
          S acc = 0;
          for (long long i = 0; i < n; ++i) acc += dyrow[i] * xrow[i];
          dwp[static_cast<size_t>(r) * cols + c] += acc;
        }
      }
    }
    if (t.nodes_[x_id].needs_grad) {
      S* dxp = t.grad_buf(x_id).ptr();
      for (int r = 0; r < rows; ++r) {
        const S* dyrow = dyp + static_cast<size_t>(r) * n;
        for (int c = 0; c < cols; ++c) {
          const S wv = wp[static_cast<size_t>(r) * cols + c];
          if (wv == S(0)) continue;
          S* dxrow = dxp + static_cast<size_t>(c) * n;
          for (long long i = 0; i < n; ++i) dxrow[i] += wv * dyrow[i];
        }
      }
    }
  });
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::add_bias(NodeId x_id, NodeId b_id) {
  const TensorT<S>& x = nodes_[x_id].value;
  const TensorT<S>& b = nodes_[b_id].value;
  require(b.rank() == 1 && x.rank() >= 1 && b.dim(0) == x.dim(0), errc::ShapeMismatch,
          "bias length must match the leading dimension");
  const int c = x.dim(0);
  const long long n = x.numel() / c;
  TensorT<S> y = x;
  for (int i = 0; i < c; ++i) {
    S* row = y.ptr() + static_cast<size_t>(i) * n;
    const S bv = b.data[i];
    for (long long j = 0; j < n; ++j) row[j] += bv;
  }
  const NodeId out_id = size();
  bool ng = nodes_[x_id].needs_grad || nodes_[b_id].needs_grad;
  return push(std::move(y), ng, [out_id, x_id, b_id, c, n](TapeT& t) {
    const S* dyp = t.nodes_[out_id].grad.ptr();
    if (t.nodes_[x_id].needs_grad) {
      S* dxp = t.grad_buf(x_id).ptr();
      const long long total = static_cast<long long>(c) * n;
      for (long long i = 0; i < total; ++i) dxp[i] += dyp[i];
    }
    if (t.nodes_[b_id].needs_grad) {
      S* dbp = t.grad_buf(b_id).ptr();
      for (int i = 0; i < c; ++i) {
        const S* row = dyp + static_cast<size_t>(i) * n;
        S acc = 0;
        for (long long j = 0; j < n; ++j) acc += row[j];
        dbp[i] += acc;
      }
    }
  });
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::graph_mix(NodeId z_id, NodeId op_id) {
  const TensorT<S>& z = nodes_[z_id].value;
  const TensorT<S>& op = nodes_[op_id].value;
  require(z.rank() == 4, errc::ShapeMismatch, "graph_mix input must be [C,T,V,M]");
  require(op.rank() == 2 && op.dim(0) == op.dim(1), errc::ShapeMismatch,
          "graph_mix operator must be square");
  const int C = z.dim(0), T = z.dim(1), V = z.dim(2), M = z.dim(3);
  require(op.dim(0) == V, errc::ShapeMismatch,
          "graph_mix operator size must match the vertex axis");

  TensorT<S> y(z.shape);
  {
    const S* zp = z.ptr();
    const S* opp = op.ptr();
    S* yp = y.ptr();
    const long long block = static_cast<long long>(V) * M;
    const long long blocks = static_cast<long long>(C) * T;
    for (long long b = 0; b < blocks; ++b) {
      const S* zb = zp + b * block;
      S* yb = yp + b * block;
      for (int i = 0; i < V; ++i) {
        const S* oprow = opp + static_cast<size_t>(i) * V;
        S* yrow = yb + static_cast<size_t>(i) * M;
        for (int j = 0; j < V; ++j) {
          const S ov = oprow[j];
          if (ov == S(0)) continue;
          const S* zrow = zb + static_cast<size_t>(j) * M;
          for (int m = 0; m < M; ++m) yrow[m] += ov * zrow[m];
        }
      }
    }
  }
  const NodeId out_id = size();
  bool ng = nodes_[z_id].needs_grad || nodes_[op_id].needs_grad;
  const long long block = static_cast<long long>(V) * M;
  const long long blocks = static_cast<long long>(C) * T;
  return push(std::move(y), ng, [out_id, z_id, op_id, V, M, blocks, block](TapeT& t) {
    const S* dyp = t.nodes_[out_id].grad.ptr();
    const S* opp = t.nodes_[op_id].value.ptr();
    const S* zp = t.nodes_[z_id].value.ptr();
    if (t.nodes_[z_id].needs_grad) {
      S* dzp = t.grad_buf(z_id).ptr();
      for (long long b = 0; b < blocks; ++b) {
        const S* dyb = dyp + b * block;
        S* dzb = dzp + b * block;
        for (int i = 0; i < V; ++i) {
          const S* oprow = opp + static_cast<size_t>(i) * V;
          const S* dyrow = dyb + static_cast<size_t>(i) * M;
          for (int j = 0; j < V; ++j) {
            const S ov = oprow[j];
            if (ov == S(0)) continue;
            S* dzrow = dzb + static_cast<size_t>(j) * M;
            for (int m = 0; m < M; ++m) dzrow[m] += ov * dyrow[m];
          }
        }
      }
    }
    if (t.nodes_[op_id].needs_grad) {
      S* dopp = t.grad_buf(op_id).ptr();
      for (long long b = 0; b < blocks; ++b) {
        const S* dyb = dyp + b * block;
        const S* zb = zp + b * block;
        for (int i = 0; i < V; ++i) {
          const S* dyrow = dyb + static_cast<size_t>(i) * M;
          S* doprow = dopp + static_cast<size_t>(i) * V;
          for (int j = 0; j < V; ++j) {
            const S* zrow = zb + static_cast<size_t>(j) * M;
            S acc = 0;
            for (int m = 0; m < M; ++m) acc += dyrow[m] * zrow[m];
            doprow[j] += acc;
          }
        }
      }
    }
  });
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::temporal_conv(NodeId x_id, NodeId w_id, int stride) {
  const TensorT<S>& x = nodes_[x_id].value;
  const TensorT<S>& w = nodes_[w_id].value;
  require(x.rank() == 4, errc::ShapeMismatch, "temporal_conv input must be [C,T,V,M]");
  require(w.rank() == 3, errc::ShapeMismatch,
          "temporal_conv kernel must be [C_out,C_in,tau]");
  require(stride >= 1, errc::ShapeMismatch, "stride must be >= 1");
  const int C = x.dim(0), T = x.dim(1), V = x.dim(2), M = x.dim(3);
  const int Co = w.dim(0), Ci = w.dim(1), tau = w.dim(2);
  require(Ci == C, errc::ShapeMismatch, "temporal_conv channel mismatch");
  require(tau % 2 == 1, errc::ShapeMismatch, "temporal_conv kernel width must be odd");
  const int pad = tau / 2;
  const int To = (T - 1) / stride + 1;  // ceil(T / stride)
  const long long vm = static_cast<long long>(V) * M;

  TensorT<S> y({Co, To, V, M});
  {
    const S* xp = x.ptr();
    const S* wp = w.ptr();
    S* yp = y.ptr();
    for (int o = 0; o < Co; ++o) {
      for (int c = 0; c < C; ++c) {
        for (int d = 0; d < tau; ++d) {
          const S wv = wp[(static_cast<size_t>(o) * C + c) * tau + d];
          if (wv == S(0)) continue;
          for (int t = 0; t < To; ++t) {
            const int ti = t * stride + d - pad;
            if (ti < 0 || ti >= T) continue;
            S* yrow = yp + (static_cast<size_t>(o) * To + t) * vm;
            const S* xrow = xp + (static_cast<size_t>(c) * T + ti) * vm;
            for (long long i = 0; i < vm; ++i) yrow[i] += wv * xrow[i];
          }
        }
      }
    }
  }
  const NodeId out_id = size();
  bool ng = nodes_[x_id].needs_grad || nodes_[w_id].needs_grad;
  return push(std::move(y), ng,
              [out_id, x_id, w_id, stride, C, T, Co, tau, pad, To, vm](TapeT& t) {
                const S* dyp = t.nodes_[out_id].grad.ptr();
                const S* xp = t.nodes_[x_id].value.ptr();
                const S* wp = t.nodes_[w_id].value.ptr();
                if (t.nodes_[w_id].needs_grad) {
                  S* dwp = t.grad_buf(w_id).ptr();
                  for (int o = 0; o < Co; ++o) {
                    for (int c = 0; c < C; ++c) {
                      for (int d = 0; d < tau; ++d) {
                        S acc = 0;
                        for (int tt = 0; tt < To; ++tt) {
                          const int ti = tt * stride + d - pad;
                          if (ti < 0 || ti >= T) continue;
                          const S* dyrow = dyp + (static_cast<size_t>(o) * To + tt) * vm;
                          const S* xrow = xp + (static_cast<size_t>(c) * T + ti) * vm;
                          for (long long i = 0; i < vm; ++i) acc += dyrow[i] * xrow[i];
                        }
                        dwp[(static_cast<size_t>(o) * C + c) * tau + d] += acc;
                      }
                    }
                  }
                }
                if (t.nodes_[x_id].needs_grad) {
                  S* dxp = t.grad_buf(x_id).ptr();
                  for (int o = 0; o < Co; ++o) {
                    for (int c = 0; c < C; ++c) {
                      for (int d = 0; d < tau; ++d) {
                        const S wv = wp[(static_cast<size_t>(o) * C + c) * tau + d];
                        if (wv == S(0)) continue;
                        for (int tt = 0; tt < To; ++tt) {
                          const int ti = tt * stride + d - pad;
                          if (ti < 0 || ti >= T) continue;
                          const S* dyrow = dyp + (static_cast<size_t>(o) * To + tt) * vm;
                          S* dxrow = dxp + (static_cast<size_t>(c) * T + ti) * vm;
                          for (long long i = 0; i < vm; ++i) dxrow[i] += wv * dyrow[i];
                        }
                      }
                    }
                  }
                }
              });
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::add(NodeId a_id, NodeId b_id) {
  const TensorT<S>& a = nodes_[a_id].value;
  const TensorT<S>& b = nodes_[b_id].value;
  require(a.same_shape(b), errc::ShapeMismatch, "add requires identical shapes");
  TensorT<S> y = a;
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += b.data[i];
  const NodeId out_id = size();
  bool ng = nodes_[a_id].needs_grad || nodes_[b_id].needs_grad;
  return push(std::move(y), ng, [out_id, a_id, b_id](TapeT& t) {
    const TensorT<S>& dy = t.nodes_[out_id].grad;
    for (NodeId in : {a_id, b_id}) {
      if (!t.nodes_[in].needs_grad) continue;
      S* dp = t.grad_buf(in).ptr();
      for (size_t i = 0; i < dy.data.size(); ++i) dp[i] += dy.data[i];
    }
  });
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::mul(NodeId a_id, NodeId b_id) {
  const TensorT<S>& a = nodes_[a_id].value;
  const TensorT<S>& b = nodes_[b_id].value;
  require(a.same_shape(b), errc::ShapeMismatch, "mul requires identical shapes");
  TensorT<S> y = a;
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] *= b.data[i];
  const NodeId out_id = size();
  bool ng = nodes_[a_id].needs_grad || nodes_[b_id].needs_grad;
  return push(std::move(y), ng, [out_id, a_id, b_id](TapeT& t) {
    const TensorT<S>& dy = t.nodes_[out_id].grad;
    if (t.nodes_[a_id].needs_grad) {
      S* dp = t.grad_buf(a_id).ptr();
      const S* bp = t.nodes_[b_id].value.ptr();
      for (size_t i = 0; i < dy.data.size(); ++i) dp[i] += dy.data[i] * bp[i];
    }
    if (t.nodes_[b_id].needs_grad) {
      S* dp = t.grad_buf(b_id).ptr();
      const S* ap = t.nodes_[a_id].value.ptr();
      for (size_t i = 0; i < dy.data.size(); ++i) dp[i] += dy.data[i] * ap[i];
    }
  });
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::relu(NodeId x_id) {
  const TensorT<S>& x = nodes_[x_id].value;
  TensorT<S> y = x;
  for (auto& v : y.data) v = v > S(0) ? v : S(0);
  const NodeId out_id = size();
  return push(std::move(y), nodes_[x_id].needs_grad, [out_id, x_id](TapeT& t) {
    if (!t.nodes_[x_id].needs_grad) return;
    const TensorT<S>& dy = t.nodes_[out_id].grad;
    const S* xp = t.nodes_[x_id].value.ptr();
    S* dp = t.grad_buf(x_id).ptr();
    for (size_t i = 0; i < dy.data.size(); ++i) {
      if (xp[i] > S(0)) dp[i] += dy.data[i];
    }
  });
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::scale_by_entry(NodeId x_id, NodeId s_id, int index) {
  const TensorT<S>& x = nodes_[x_id].value;
  const TensorT<S>& s = nodes_[s_id].value;
  require(index >= 0 && index < s.numel(), errc::ShapeMismatch,
          "scale_by_entry index out of range");
  const S sv = s.data[index];
  TensorT<S> y = x;
  for (auto& v : y.data) v *= sv;
  const NodeId out_id = size();
  bool ng = nodes_[x_id].needs_grad || nodes_[s_id].needs_grad;
  return push(std::move(y), ng, [out_id, x_id, s_id, index](TapeT& t) {
    const TensorT<S>& dy = t.nodes_[out_id].grad;
    const S sv = t.nodes_[s_id].value.data[index];
    if (t.nodes_[x_id].needs_grad) {
      S* dp = t.grad_buf(x_id).ptr();
      for (size_t i = 0; i < dy.data.size(); ++i) dp[i] += sv * dy.data[i];
    }
    if (t.nodes_[s_id].needs_grad) {
      const S* xp = t.nodes_[x_id].value.ptr();
      S acc = 0;
      for (size_t i = 0; i < dy.data.size(); ++i) acc += dy.data[i] * xp[i];
      t.grad_buf(s_id).data[index] += acc;
    }
  });
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::gather_vertices(NodeId x_id, std::vector<int> indices) {
  const TensorT<S>& x = nodes_[x_id].value;
  require(x.rank() == 4, errc::ShapeMismatch, "gather_vertices input must be [C,T,V,M]");
  const int C = x.dim(0), T = x.dim(1), V = x.dim(2), M = x.dim(3);
  for (int i : indices) {
    require(i >= 0 && i < V, errc::ShapeMismatch, "gather index out of range");
  }
  const int Vp = static_cast<int>(indices.size());
  TensorT<S> y({C, T, Vp, M});
  {
    const S* xp = x.ptr();
    S* yp = y.ptr();
    for (long long b = 0; b < static_cast<long long>(C) * T; ++b) {
      const S* xb = xp + b * V * M;
      S* yb = yp + b * Vp * M;
      for (int i = 0; i < Vp; ++i) {
        const S* src = xb + static_cast<size_t>(indices[i]) * M;
        S* dst = yb + static_cast<size_t>(i) * M;
        for (int m = 0; m < M; ++m) dst[m] = src[m];
      }
    }
  }
  const NodeId out_id = size();
  bool ng = nodes_[x_id].needs_grad;
  return push(std::move(y), ng,
              [out_id, x_id, indices = std::move(indices), C, T, V, M](TapeT& t) {
                if (!t.nodes_[x_id].needs_grad) return;
                const TensorT<S>& dy = t.nodes_[out_id].grad;
                const int Vp = static_cast<int>(indices.size());
                S* dxp = t.grad_buf(x_id).ptr();
                const S* dyp = dy.ptr();
                for (long long b = 0; b < static_cast<long long>(C) * T; ++b) {
                  S* dxb = dxp + b * V * M;
                  const S* dyb = dyp + b * Vp * M;
                  for (int i = 0; i < Vp; ++i) {
                    S* dst = dxb + static_cast<size_t>(indices[i]) * M;
                    const S* src = dyb + static_cast<size_t>(i) * M;
                    for (int m = 0; m < M; ++m) dst[m] += src[m];
                  }
                }
              });
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::scatter_vertices(NodeId x_id, std::vector<int> indices,
                                                     int num_vertices) {
  const TensorT<S>& x = nodes_[x_id].value;
  require(x.rank() == 4, errc::ShapeMismatch, "scatter_vertices input must be [C,T,Vp,M]");
  const int C = x.dim(0), T = x.dim(1), Vp = x.dim(2), M = x.dim(3);
  require(Vp == static_cast<int>(indices.size()), errc::ShapeMismatch,
          "scatter index count must match the vertex axis");
  std::vector<char> seen(num_vertices, 0);
  for (int i : indices) {
    require(i >= 0 && i < num_vertices, errc::ShapeMismatch, "scatter index out of range");
    require(!seen[i], errc::ShapeMismatch, "scatter indices must be distinct");
    seen[i] = 1;
  }
  TensorT<S> y({C, T, num_vertices, M});
  {
    const S* xp = x.ptr();
    S* yp = y.ptr();
    for (long long b = 0; b < static_cast<long long>(C) * T; ++b) {
      const S* xb = xp + b * Vp * M;
      S* yb = yp + b * num_vertices * M;
      for (int i = 0; i < Vp; ++i) {
        const S* src = xb + static_cast<size_t>(i) * M;
        S* dst = yb + static_cast<size_t>(indices[i]) * M;
        for (int m = 0; m < M; ++m) dst[m] = src[m];
      }
    }
  }
  const NodeId out_id = size();
  bool ng = nodes_[x_id].needs_grad;
  return push(std::move(y), ng,
              [out_id, x_id, indices = std::move(indices), C, T, Vp, M,
               num_vertices](TapeT& t) {
                if (!t.nodes_[x_id].needs_grad) return;
                const S* dyp = t.nodes_[out_id].grad.ptr();
                S* dxp = t.grad_buf(x_id).ptr();
                for (long long b = 0; b < static_cast<long long>(C) * T; ++b) {
                  const S* dyb = dyp + b * num_vertices * M;
                  S* dxb = dxp + b * Vp * M;
                  for (int i = 0; i < Vp; ++i) {
                    const S* src = dyb + static_cast<size_t>(indices[i]) * M;
                    S* dst = dxb + static_cast<size_t>(i) * M;
                    for (int m = 0; m < M; ++m) dst[m] += src[m];
                  }
                }
              });
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::global_pool(NodeId x_id, std::vector<S> body_weights) {
  const TensorT<S>& x = nodes_[x_id].value;
  require(x.rank() == 4, errc::ShapeMismatch, "global_pool input must be [C,T,V,M]");
  const int C = x.dim(0), T = x.dim(1), V = x.dim(2), M = x.dim(3);
  require(static_cast<int>(body_weights.size()) == M, errc::ShapeMismatch,
          "body weight count must match the body axis");
  S wsum = 0;
  for (S w : body_weights) wsum += w;
  require(wsum > S(0), errc::ShapeMismatch, "global_pool needs at least one valid body");
  const S norm = S(1) / (static_cast<S>(T) * static_cast<S>(V) * wsum);

  TensorT<S> y({C});
  {
    const S* xp = x.ptr();
    for (int c = 0; c < C; ++c) {
      S acc = 0;
      const S* xc = xp + static_cast<size_t>(c) * T * V * M;
      for (long long i = 0; i < static_cast<long long>(T) * V; ++i) {
        const S* row = xc + i * M;
        for (int m = 0; m < M; ++m) acc += row[m] * body_weights[m];
      }
      y.data[c] = acc * norm;
    }
  }
  const NodeId out_id = size();
  bool ng = nodes_[x_id].needs_grad;
  return push(std::move(y), ng,
              [out_id, x_id, body_weights = std::move(body_weights), C, T, V, M,
               norm](TapeT& t) {
                if (!t.nodes_[x_id].needs_grad) return;
                const TensorT<S>& dy = t.nodes_[out_id].grad;
                S* dxp = t.grad_buf(x_id).ptr();
                for (int c = 0; c < C; ++c) {
                  const S g = dy.data[c] * norm;
                  S* dxc = dxp + static_cast<size_t>(c) * T * V * M;
                  for (long long i = 0; i < static_cast<long long>(T) * V; ++i) {
                    S* row = dxc + i * M;
                    for (int m = 0; m < M; ++m) row[m] += g * body_weights[m];
                  }
                }
              });
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::softmax_cross_entropy(NodeId logits_id, int label) {
  const TensorT<S>& logits = nodes_[logits_id].value;
  require(logits.rank() == 1, errc::ShapeMismatch, "logits must be a vector");
  const int k = logits.dim(0);
  require(label >= 0 && label < k, errc::InvalidLabel,
          "label " + std::to_string(label) + " outside [0," + std::to_string(k) + ")");
  S mx = logits.data[0];
  for (S v : logits.data) mx = std::max(mx, v);
  S sum = 0;
  std::vector<S> probs(k);
  for (int i = 0; i < k; ++i) {
    probs[i] = std::exp(logits.data[i] - mx);
    sum += probs[i];
  }
  for (auto& p : probs) p /= sum;
  const S loss = std::log(sum) + mx - logits.data[label];
  const NodeId out_id = size();
  bool ng = nodes_[logits_id].needs_grad;
  return push(TensorT<S>::scalar(loss), ng,
              [out_id, logits_id, label, probs = std::move(probs)](TapeT& t) {
                if (!t.nodes_[logits_id].needs_grad) return;
                const S g = t.nodes_[out_id].grad.data[0];
                S* dp = t.grad_buf(logits_id).ptr();
                for (size_t i = 0; i < probs.size(); ++i) {
                  S delta = probs[i] - (static_cast<int>(i) == label ? S(1) : S(0));
                  dp[i] += g * delta;
                }
              });
}

template <class S>
typename TapeT<S>::NodeId TapeT<S>::sum(NodeId x_id) {
  const TensorT<S>& x = nodes_[x_id].value;
  S acc = 0;
  for (S v : x.data) acc += v;
  const NodeId out_id = size();
  bool ng = nodes_[x_id].needs_grad;
  return push(TensorT<S>::scalar(acc), ng, [out_id, x_id](TapeT& t) {
    if (!t.nodes_[x_id].needs_grad) return;
    const S g = t.nodes_[out_id].grad.data[0];
    TensorT<S>& dx = t.grad_buf(x_id);
    for (auto& v : dx.data) v += g;
  });
}

template <class S>
void TapeT<S>::backward(NodeId loss) {
  run_backward(loss, nullptr);
}

template <class S>
void TapeT<S>::backward(NodeId loss,
                        std::unordered_map<const ParameterT<S>*, TensorT<S>>& sink) {
  run_backward(loss, &sink);
}

template <class S>
void TapeT<S>::run_backward(NodeId loss,
                            std::unordered_map<const ParameterT<S>*, TensorT<S>>* sink) {
  require(loss >= 0 && loss < size(), errc::NonScalarLoss, "unknown loss node");
  require(nodes_[loss].value.numel() == 1, errc::NonScalarLoss,
          "backward requires a scalar loss");
  grad_buf(loss).data[0] = S(1);
  for (NodeId id = loss; id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.needs_grad || node.grad.data.empty()) continue;
    if (node.pull) node.pull(*this);
    if (node.parameter != nullptr) {
      if (sink != nullptr) {
        auto [it, fresh] =
            sink->try_emplace(node.parameter, TensorT<S>::zeros(node.value.shape));
        TensorT<S>& g = it->second;
        for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += node.grad.data[i];
      } else {
        ParameterT<S>& p = *node.parameter;
        for (size_t i = 0; i < p.grad.data.size(); ++i) {
          p.grad.data[i] += node.grad.data[i];
        }
        ++p.grad_updates;
      }
    }
  }
}

template struct TensorT<float>;
template struct TensorT<double>;
template struct ParameterT<float>;
template struct ParameterT<double>;
template class TapeT<float>;
template class TapeT<double>;

}  // namespace pbgcn
