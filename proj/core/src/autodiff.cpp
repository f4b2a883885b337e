#include "sgrpo/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace sgrpo {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Tape::NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(NodeId id) {
  auto& g = grads_[static_cast<std::size_t>(id)];
  const auto& v = nodes_[static_cast<std::size_t>(id)].value;
  if (g.rows != v.rows || g.cols != v.cols) g = Tensor(v.rows, v.cols);
  return g;
}

Tape::NodeId Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.requires_grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::NodeId Tape::constant(Tensor value) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::NodeId Tape::view(NodeId flat, int offset, int rows, int cols) {
  const Tensor& src = value(flat);
  if (offset < 0 || static_cast<std::size_t>(offset) + static_cast<std::size_t>(rows) * cols > src.size()) {
    throw std::out_of_range("view: window outside source tensor");
  }
  Node n;
  n.op = Op::kView;
  n.in0 = flat;
  n.requires_grad = needs_grad(flat);
  n.iaux = {offset};
  n.value = Tensor(rows, cols);
  std::copy(src.data.begin() + offset,
            src.data.begin() + offset + static_cast<std::size_t>(rows) * cols,
            n.value.data.begin());
  return push(std::move(n));
}

Tape::NodeId Tape::gather_rows(NodeId m, std::vector<int> row_ids) {
  const Tensor& src = value(m);
  Node n;
  n.op = Op::kGatherRows;
  n.in0 = m;
  n.requires_grad = needs_grad(m);
  n.value = Tensor(static_cast<int>(row_ids.size()), src.cols);
  for (std::size_t t = 0; t < row_ids.size(); ++t) {
    const auto r = src.row(row_ids[t]);
    std::copy(r.begin(), r.end(), n.value.row(static_cast<int>(t)).begin());
    n.iaux.push_back(row_ids[t]);
  }
  return push(std::move(n));
}

Tape::NodeId Tape::gather_elems(NodeId m, std::vector<std::pair<int, int>> idx) {
  const Tensor& src = value(m);
  Node n;
  n.op = Op::kGatherElems;
  n.in0 = m;
  n.requires_grad = needs_grad(m);
  n.value = Tensor(1, static_cast<int>(idx.size()));
  for (std::size_t t = 0; t < idx.size(); ++t) {
    n.value.data[t] = src.at(idx[t].first, idx[t].second);
    n.iaux.push_back(idx[t].first);
    n.iaux.push_back(idx[t].second);
  }
  return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  check_same_shape(value(a), value(b), "add");
  Node n;
  n.op = Op::kAdd;
  n.in0 = a;
  n.in1 = b;
  n.requires_grad = needs_grad(a) || needs_grad(b);
  n.value = value(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value.data[i] += value(b).data[i];
  return push(std::move(n));
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  check_same_shape(value(a), value(b), "sub");
  Node n;
  n.op = Op::kSub;
  n.in0 = a;
  n.in1 = b;
  n.requires_grad = needs_grad(a) || needs_grad(b);
  n.value = value(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value.data[i] -= value(b).data[i];
  return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  check_same_shape(value(a), value(b), "mul");
  Node n;
  n.op = Op::kMul;
  n.in0 = a;
  n.in1 = b;
  n.requires_grad = needs_grad(a) || needs_grad(b);
  n.value = value(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value.data[i] *= value(b).data[i];
  return push(std::move(n));
}

Tape::NodeId Tape::add_rowvec(NodeId m, NodeId v) {
  const Tensor& mm = value(m);
  const Tensor& vv = value(v);
  if (vv.rows != 1 || vv.cols != mm.cols) {
    throw std::invalid_argument("add_rowvec: vector must be 1 x cols");
  }
  Node n;
  n.op = Op::kAddRowVec;
  n.in0 = m;
  n.in1 = v;
  n.requires_grad = needs_grad(m) || needs_grad(v);
  n.value = mm;
  for (int r = 0; r < mm.rows; ++r) {
    auto out = n.value.row(r);
    for (int c = 0; c < mm.cols; ++c) out[c] += vv.data[static_cast<std::size_t>(c)];
  }
  return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, double c) {
  Node n;
  n.op = Op::kScale;
  n.in0 = a;
  n.requires_grad = needs_grad(a);
  n.daux = {c};
  n.value = value(a);
  for (double& x : n.value.data) x *= c;
  return push(std::move(n));
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& aa = value(a);
  const Tensor& bb = value(b);
  if (aa.cols != bb.rows) throw std::invalid_argument("matmul: inner dims differ");
  Node n;
  n.op = Op::kMatmul;
  n.in0 = a;
  n.in1 = b;
  n.requires_grad = needs_grad(a) || needs_grad(b);
  n.value = Tensor(aa.rows, bb.cols);
  kernels::matmul_acc(aa, bb, n.value);
  return push(std::move(n));
}

Tape::NodeId Tape::matmul_bt(NodeId a, NodeId b) {
  const Tensor& aa = value(a);
  const Tensor& bb = value(b);
  if (aa.cols != bb.cols) throw std::invalid_argument("matmul_bt: inner dims differ");
  Node n;
  n.op = Op::kMatmulBt;
  n.in0 = a;
  n.in1 = b;
  n.requires_grad = needs_grad(a) || needs_grad(b);
  n.value = Tensor(aa.rows, bb.rows);
  kernels::matmul_bt_acc(aa, bb, n.value);
  return push(std::move(n));
}

Tape::NodeId Tape::row_softmax(NodeId a) {
  Node n;
  n.op = Op::kRowSoftmax;
  n.in0 = a;
  n.requires_grad = needs_grad(a);
  n.value = value(a);
  for (int r = 0; r < n.value.rows; ++r) kernels::softmax_row(n.value.row(r));
  return push(std::move(n));
}

Tape::NodeId Tape::row_log_softmax(NodeId a) {
  const Tensor& aa = value(a);
  Node n;
  n.op = Op::kRowLogSoftmax;
  n.in0 = a;
  n.requires_grad = needs_grad(a);
  n.value = Tensor(aa.rows, aa.cols);
  for (int r = 0; r < aa.rows; ++r) {
    kernels::log_softmax_row(aa.row(r), n.value.row(r));
  }
  return push(std::move(n));
}

Tape::NodeId Tape::rms_norm(NodeId x, NodeId gain) {
  const Tensor& xx = value(x);
  const Tensor& gg = value(gain);
  if (gg.rows != 1 || gg.cols != xx.cols) {
    throw std::invalid_argument("rms_norm: gain must be 1 x cols");
  }
  Node n;
  n.op = Op::kRmsNorm;
  n.in0 = x;
  n.in1 = gain;
  n.requires_grad = needs_grad(x) || needs_grad(gain);
  n.value = Tensor(xx.rows, xx.cols);
  n.daux.resize(static_cast<std::size_t>(xx.rows));
  for (int r = 0; r < xx.rows; ++r) {
    n.daux[static_cast<std::size_t>(r)] = kernels::rmsnorm_row(
        xx.row(r), gg.row(0), n.value.row(r), kernels::kRmsNormEps);
  }
  return push(std::move(n));
}

Tape::NodeId Tape::tanh_op(NodeId a) {
  Node n;
  n.op = Op::kTanh;
  n.in0 = a;
  n.requires_grad = needs_grad(a);
  n.value = value(a);
  for (double& v : n.value.data) v = std::tanh(v);
  return push(std::move(n));
}

Tape::NodeId Tape::exp_op(NodeId a) {
  Node n;
  n.op = Op::kExp;
  n.in0 = a;
  n.requires_grad = needs_grad(a);
  n.value = value(a);
  for (double& v : n.value.data) v = std::exp(v);
  return push(std::move(n));
}

Tape::NodeId Tape::clamp(NodeId a, double lo, double hi) {
  Node n;
  n.op = Op::kClamp;
  n.in0 = a;
  n.requires_grad = needs_grad(a);
  n.daux = {lo, hi};
  n.value = value(a);
  for (double& v : n.value.data) v = std::min(std::max(v, lo), hi);
  return push(std::move(n));
}

Tape::NodeId Tape::min_op(NodeId a, NodeId b) {
  check_same_shape(value(a), value(b), "min");
  Node n;
  n.op = Op::kMin;
  n.in0 = a;
  n.in1 = b;
  n.requires_grad = needs_grad(a) || needs_grad(b);
  n.value = value(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) {
    n.value.data[i] = std::min(n.value.data[i], value(b).data[i]);
  }
  return push(std::move(n));
}

Tape::NodeId Tape::sum(NodeId a) {
  Node n;
  n.op = Op::kSum;
  n.in0 = a;
  n.requires_grad = needs_grad(a);
  n.value = Tensor(1, 1);
  double acc = 0.0;
  for (double v : value(a).data) acc += v;
  n.value.data[0] = acc;
  return push(std::move(n));
}

void Tape::backward(NodeId root) {
  const Tensor& rv = value(root);
  if (rv.rows != 1 || rv.cols != 1) {
    throw std::invalid_argument("backward: root must be scalar");
  }
  grads_.assign(nodes_.size(), Tensor());
  grad_buf(root).data[0] = 1.0;
  for (NodeId id = root; id >= 0; --id) {
    if (!nodes_[static_cast<std::size_t>(id)].requires_grad) continue;
    if (grads_[static_cast<std::size_t>(id)].size() == 0) continue;  // unreached
    backward_node(id);
  }
}

void Tape::backward_node(NodeId id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const Tensor& g = grads_[static_cast<std::size_t>(id)];
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConst:
      break;
    case Op::kView: {
      if (!needs_grad(n.in0)) break;
      Tensor& d = grad_buf(n.in0);
      const int offset = n.iaux[0];
      for (std::size_t i = 0; i < g.size(); ++i) d.data[offset + i] += g.data[i];
      break;
    }
    case Op::kGatherRows: {
      if (!needs_grad(n.in0)) break;
      Tensor& d = grad_buf(n.in0);
      for (int t = 0; t < g.rows; ++t) {
        auto dst = d.row(n.iaux[static_cast<std::size_t>(t)]);
        const auto src = g.row(t);
        for (int c = 0; c < g.cols; ++c) dst[c] += src[c];
      }
      break;
    }
    case Op::kGatherElems: {
      if (!needs_grad(n.in0)) break;
      Tensor& d = grad_buf(n.in0);
      for (int t = 0; t < g.cols; ++t) {
        d.at(n.iaux[static_cast<std::size_t>(2 * t)],
             n.iaux[static_cast<std::size_t>(2 * t + 1)]) += g.data[static_cast<std::size_t>(t)];
      }
      break;
    }
    case Op::kAdd: {
      for (NodeId in : {n.in0, n.in1}) {
        if (!needs_grad(in)) continue;
        Tensor& d = grad_buf(in);
        for (std::size_t i = 0; i < g.size(); ++i) d.data[i] += g.data[i];
      }
      break;
    }
    case Op::kSub: {
      if (needs_grad(n.in0)) {
        Tensor& d = grad_buf(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) d.data[i] += g.data[i];
      }
      if (needs_grad(n.in1)) {
        Tensor& d = grad_buf(n.in1);
        for (std::size_t i = 0; i < g.size(); ++i) d.data[i] -= g.data[i];
      }
      break;
    }
    case Op::kMul: {
      if (needs_grad(n.in0)) {
        Tensor& d = grad_buf(n.in0);
        const Tensor& other = value(n.in1);
        for (std::size_t i = 0; i < g.size(); ++i) d.data[i] += g.data[i] * other.data[i];
      }
      if (needs_grad(n.in1)) {
        Tensor& d = grad_buf(n.in1);
        const Tensor& other = value(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) d.data[i] += g.data[i] * other.data[i];
      }
      break;
    }
    case Op::kAddRowVec: {
      if (needs_grad(n.in0)) {
        Tensor& d = grad_buf(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) d.data[i] += g.data[i];
      }
      if (needs_grad(n.in1)) {
        Tensor& d = grad_buf(n.in1);
        for (int r = 0; r < g.rows; ++r) {
          const auto src = g.row(r);
          for (int c = 0; c < g.cols; ++c) d.data[static_cast<std::size_t>(c)] += src[c];
        }
      }
      break;
    }
    case Op::kScale: {
      if (!needs_grad(n.in0)) break;
      Tensor& d = grad_buf(n.in0);
      const double c = n.daux[0];
      for (std::size_t i = 0; i < g.size(); ++i) d.data[i] += g.data[i] * c;
      break;
    }
    case Op::kMatmul: {
      if (needs_grad(n.in0)) kernels::matmul_bt_acc(g, value(n.in1), grad_buf(n.in0));
      if (needs_grad(n.in1)) kernels::matmul_at_acc(value(n.in0), g, grad_buf(n.in1));
      break;
    }
    case Op::kMatmulBt: {
      // c = a b^T: da += g b, db += g^T a
      if (needs_grad(n.in0)) kernels::matmul_acc(g, value(n.in1), grad_buf(n.in0));
      if (needs_grad(n.in1)) kernels::matmul_at_acc(g, value(n.in0), grad_buf(n.in1));
      break;
    }
    case Op::kRowSoftmax: {
      if (!needs_grad(n.in0)) break;
      Tensor& d = grad_buf(n.in0);
      for (int r = 0; r < g.rows; ++r) {
        const auto y = n.value.row(r);
        const auto gr = g.row(r);
        auto dr = d.row(r);
        double dot = 0.0;
        for (int c = 0; c < g.cols; ++c) dot += gr[c] * y[c];
        for (int c = 0; c < g.cols; ++c) dr[c] += (gr[c] - dot) * y[c];
      }
      break;
    }
    case Op::kRowLogSoftmax: {
      if (!needs_grad(n.in0)) break;
      Tensor& d = grad_buf(n.in0);
      for (int r = 0; r < g.rows; ++r) {
        const auto y = n.value.row(r);  // log-probs
        const auto gr = g.row(r);
        auto dr = d.row(r);
        double gsum = 0.0;
        for (int c = 0; c < g.cols; ++c) gsum += gr[c];
        for (int c = 0; c < g.cols; ++c) dr[c] += gr[c] - std::exp(y[c]) * gsum;
      }
      break;
    }
    case Op::kRmsNorm: {
      const Tensor& x = value(n.in0);
      const Tensor& gain = value(n.in1);
      const int cols = x.cols;
      for (int r = 0; r < x.rows; ++r) {
        const double rms = n.daux[static_cast<std::size_t>(r)];
        const auto xr = x.row(r);
        const auto gr = g.row(r);
        if (needs_grad(n.in0)) {
          auto dr = grad_buf(n.in0).row(r);
          double s = 0.0;
          for (int c = 0; c < cols; ++c) s += gr[c] * gain.data[static_cast<std::size_t>(c)] * xr[c];
          const double coef = s / (static_cast<double>(cols) * rms * rms * rms);
          for (int c = 0; c < cols; ++c) {
            dr[c] += gr[c] * gain.data[static_cast<std::size_t>(c)] / rms - xr[c] * coef;
          }
        }
        if (needs_grad(n.in1)) {
          auto dg = grad_buf(n.in1).row(0);
          for (int c = 0; c < cols; ++c) dg[c] += gr[c] * xr[c] / rms;
        }
      }
      break;
    }
    case Op::kTanh: {
      if (!needs_grad(n.in0)) break;
      Tensor& d = grad_buf(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = n.value.data[i];
        d.data[i] += g.data[i] * (1.0 - y * y);
      }
      break;
    }
    case Op::kExp: {
      if (!needs_grad(n.in0)) break;
      Tensor& d = grad_buf(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i) d.data[i] += g.data[i] * n.value.data[i];
      break;
    }
    case Op::kClamp: {
      if (!needs_grad(n.in0)) break;
      Tensor& d = grad_buf(n.in0);
      const Tensor& x = value(n.in0);
      const double lo = n.daux[0], hi = n.daux[1];
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x.data[i] >= lo && x.data[i] <= hi) d.data[i] += g.data[i];
      }
      break;
    }
    case Op::kMin: {
      const Tensor& a = value(n.in0);
      const Tensor& b = value(n.in1);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const NodeId target = a.data[i] <= b.data[i] ? n.in0 : n.in1;
        if (needs_grad(target)) grad_buf(target).data[i] += g.data[i];
      }
      break;
    }
    case Op::kSum: {
      if (!needs_grad(n.in0)) break;
      Tensor& d = grad_buf(n.in0);
      const double gv = g.data[0];
      for (double& v : d.data) v += gv;
      break;
    }
  }
}

}  // namespace sgrpo
