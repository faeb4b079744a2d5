#include "gmnmt/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gmnmt/core/errors.hpp"
#include "gmnmt/core/kernels.hpp"

namespace gmnmt {

AttentionMask AttentionMask::all(std::size_t queries, std::size_t keys) {
  return AttentionMask{queries, keys, std::vector<std::uint8_t>(queries * keys, 1)};
}

AttentionMask AttentionMask::causal(std::size_t length) {
  AttentionMask m{length, length, std::vector<std::uint8_t>(length * length, 0)};
  for (std::size_t q = 0; q < length; ++q)
    for (std::size_t k = 0; k <= q; ++k) m.allowed[q * length + k] = 1;
  return m;
}

namespace ops {
namespace {

bool tracks(const Tape& tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape.recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

Tensor result(Shape shape, std::vector<double> values, bool track) {
  return Tensor::from(std::move(shape), std::move(values), track);
}

// Accumulates `g` into t.grad when t tracks a gradient.
void accumulate(const Tensor& t, std::span<const double> g) {
  if (!t.requires_grad()) return;
  auto dst = t.mutable_grad();
  kernels::active().axpy(g.size(), 1.0, g.data(), dst.data());
}

std::size_t norm_axis(const Tensor& x, int axis) {
  const int r = static_cast<int>(x.rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r)
    throw DimensionError("axis " + std::to_string(axis) + " invalid for shape " + shape_string(x.shape()));
  return static_cast<std::size_t>(a);
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank)
    throw DimensionError(std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                         shape_string(x.shape()));
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2 || a.dim(-1) != b.dim(-2))
    throw DimensionError("matmul shape mismatch: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  const std::size_t m = a.dim(-2), k = a.dim(-1), n = b.dim(-1);
  const Shape ba(a.shape().begin(), a.shape().end() - 2);
  const Shape bb(b.shape().begin(), b.shape().end() - 2);
  const std::size_t nb = std::max(ba.size(), bb.size());
  Shape bc(nb, 1);
  for (std::size_t i = 0; i < nb; ++i) {
    const std::size_t da = i < nb - ba.size() ? 1 : ba[i - (nb - ba.size())];
    const std::size_t db = i < nb - bb.size() ? 1 : bb[i - (nb - bb.size())];
    if (da != db && da != 1 && db != 1)
      throw DimensionError("matmul batch dimensions not broadcastable: " + shape_string(a.shape()) +
                           " x " + shape_string(b.shape()));
    bc[i] = std::max(da, db);
  }
  const std::size_t batches = shape_numel(bc);
  // Per output batch, the source matrix index in a and b.
  std::vector<std::size_t> ia(batches), ib(batches);
  for (std::size_t lin = 0; lin < batches; ++lin) {
    std::size_t rem = lin, oa = 0, ob = 0, sa = 1, sb = 1;
    for (std::size_t d = nb; d-- > 0;) {
      const std::size_t idx = rem % bc[d];
      rem /= bc[d];
      const std::ptrdiff_t pa = static_cast<std::ptrdiff_t>(d) - static_cast<std::ptrdiff_t>(nb - ba.size());
      const std::ptrdiff_t pb = static_cast<std::ptrdiff_t>(d) - static_cast<std::ptrdiff_t>(nb - bb.size());
      if (pa >= 0) {
        const std::size_t dim = ba[static_cast<std::size_t>(pa)];
        oa += (dim == 1 ? 0 : idx) * sa;
        sa *= dim;
      }
      if (pb >= 0) {
        const std::size_t dim = bb[static_cast<std::size_t>(pb)];
        ob += (dim == 1 ? 0 : idx) * sb;
        sb *= dim;
      }
    }
    ia[lin] = oa;
    ib[lin] = ob;
  }

  const auto& kt = kernels::active();
  std::vector<double> out(batches * m * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < batches; ++i)
    kt.gemm_nn(m, n, k, pa + ia[i] * m * k, pb + ib[i] * k * n, out.data() + i * m * n);

  Shape shape = bc;
  shape.push_back(m);
  shape.push_back(n);
  const bool track = tracks(tape, {&a, &b});
  Tensor c = result(std::move(shape), std::move(out), track);
  if (track) {
    tape.record([a, b, c, ia, ib, m, n, k]() {
      const auto& kt = kernels::active();
      const double* gc = c.grad().data();
      for (std::size_t i = 0; i < ia.size(); ++i) {
        if (a.requires_grad())
          kt.gemm_nt(m, k, n, gc + i * m * n, b.data().data() + ib[i] * k * n,
                     a.mutable_grad().data() + ia[i] * m * k);
        if (b.requires_grad())
          kt.gemm_tn(k, n, m, a.data().data() + ia[i] * m * k, gc + i * m * n,
                     b.mutable_grad().data() + ib[i] * k * n);
      }
    });
  }
  return c;
}

Tensor transpose(Tape& tape, const Tensor& a) {
  if (a.rank() < 2) throw DimensionError("transpose needs rank >= 2, got " + shape_string(a.shape()));
  const std::size_t r = a.dim(-2), c = a.dim(-1);
  const std::size_t batches = a.numel() / std::max<std::size_t>(r * c, 1);
  Shape shape = a.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  std::vector<double> out(a.numel());
  const auto src = a.data();
  for (std::size_t bi = 0; bi < batches; ++bi)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[bi * r * c + j * r + i] = src[bi * r * c + i * c + j];
  const bool track = tracks(tape, {&a});
  Tensor t = result(std::move(shape), std::move(out), track);
  if (track) {
    tape.record([a, t, r, c, batches]() {
      auto ga = a.mutable_grad();
      const auto gt = t.grad();
      for (std::size_t bi = 0; bi < batches; ++bi)
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) ga[bi * r * c + i * c + j] += gt[bi * r * c + j * r + i];
    });
  }
  return t;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  const bool suffix = sb.size() <= sa.size() && std::equal(sb.begin(), sb.end(), sa.end() - static_cast<std::ptrdiff_t>(sb.size()));
  if (!suffix)
    throw DimensionError("add shape mismatch: " + shape_string(sa) + " + " + shape_string(sb));
  const std::size_t inner = b.numel();
  const std::size_t reps = inner == 0 ? 0 : a.numel() / inner;
  const auto& kt = kernels::active();
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < reps; ++r)
    kt.add(inner, a.data().data() + r * inner, b.data().data(), out.data() + r * inner);
  const bool track = tracks(tape, {&a, &b});
  Tensor c = result(sa, std::move(out), track);
  if (track) {
    tape.record([a, b, c, inner, reps]() {
      accumulate(a, c.grad());
      if (b.requires_grad()) {
        const auto& kt = kernels::active();
        for (std::size_t r = 0; r < reps; ++r)
          kt.axpy(inner, 1.0, c.grad().data() + r * inner, b.mutable_grad().data());
      }
    });
  }
  return c;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError("mul shape mismatch: " + shape_string(a.shape()) + " * " + shape_string(b.shape()));
  std::vector<double> out(a.numel());
  kernels::active().mul(out.size(), a.data().data(), b.data().data(), out.data());
  const bool track = tracks(tape, {&a, &b});
  Tensor c = result(a.shape(), std::move(out), track);
  if (track) {
    tape.record([a, b, c]() {
      const auto gc = c.grad();
      for (std::size_t i = 0; i < gc.size(); ++i) {
        if (a.requires_grad()) a.mutable_grad()[i] += gc[i] * b.data()[i];
        if (b.requires_grad()) b.mutable_grad()[i] += gc[i] * a.data()[i];
      }
    });
  }
  return c;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= factor;
  const bool track = tracks(tape, {&a});
  Tensor c = result(a.shape(), std::move(out), track);
  if (track) {
    tape.record([a, c, factor]() {
      kernels::active().axpy(c.numel(), factor, c.grad().data(), a.mutable_grad().data());
    });
  }
  return c;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto src = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = src[i];
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  const bool track = tracks(tape, {&x});
  Tensor y = result(x.shape(), std::move(out), track);
  if (track) {
    tape.record([x, y]() {
      auto gx = x.mutable_grad();
      const auto gy = y.grad();
      const auto yv = y.data();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * yv[i] * (1.0 - yv[i]);
    });
  }
  return y;
}

Tensor relu(Tape& tape, const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v = v <= 0.0 ? 0.0 : v;  // NaN passes through
  const bool track = tracks(tape, {&x});
  Tensor y = result(x.shape(), std::move(out), track);
  if (track) {
    tape.record([x, y]() {
      auto gx = x.mutable_grad();
      const auto gy = y.grad();
      const auto xv = x.data();
      for (std::size_t i = 0; i < gy.size(); ++i)
        if (xv[i] > 0.0) gx[i] += gy[i];
    });
  }
  return y;
}

namespace {

// y = softmax(x) backward along a strided line: dx = y * (dy - <dy, y>).
void softmax_line_backward(const double* y, const double* gy, double* gx, std::size_t len,
                           std::size_t stride) {
  double dotp = 0.0;
  for (std::size_t i = 0; i < len; ++i) dotp += gy[i * stride] * y[i * stride];
  for (std::size_t i = 0; i < len; ++i) gx[i * stride] += y[i * stride] * (gy[i * stride] - dotp);
}

}  // namespace

Tensor softmax(Tape& tape, const Tensor& x, int axis) {
  const std::size_t ax = norm_axis(x, axis);
  const auto& shape = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= shape[i];
  for (std::size_t i = ax + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[ax];
  std::vector<double> out(x.numel());
  const auto src = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, src[base + i * inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        const double e = std::exp(src[base + i * inner] - mx);
        out[base + i * inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < len; ++i) out[base + i * inner] /= total;
    }
  }
  const bool track = tracks(tape, {&x});
  Tensor y = result(shape, std::move(out), track);
  if (track) {
    tape.record([x, y, outer, inner, len]() {
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * len * inner + in;
          softmax_line_backward(y.data().data() + base, y.grad().data() + base,
                                x.mutable_grad().data() + base, len, inner);
        }
    });
  }
  return y;
}

Tensor masked_softmax(Tape& tape, const Tensor& x, const AttentionMask& mask) {
  if (x.rank() < 2 || x.dim(-2) != mask.queries || x.dim(-1) != mask.keys)
    throw DimensionError("mask " + shape_string({mask.queries, mask.keys}) +
                         " does not match scores " + shape_string(x.shape()));
  const std::size_t q = mask.queries, k = mask.keys;
  const std::size_t rows = q == 0 ? 0 : x.numel() / k;
  std::vector<double> out(x.numel(), 0.0);
  const auto src = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t qi = r % q;
    const double* in = src.data() + r * k;
    double* o = out.data() + r * k;
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < k; ++j)
      if (mask.at(qi, j)) {
        any = true;
        if (!(in[j] <= mx)) mx = in[j];  // lets NaN through
      }
    if (!any)
      throw DataError("attention query " + std::to_string(qi) + " has no attendable key");
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (!mask.at(qi, j)) continue;
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < k; ++j) o[j] /= total;
  }
  const bool track = tracks(tape, {&x});
  Tensor y = result(x.shape(), std::move(out), track);
  if (track) {
    tape.record([x, y, rows, k]() {
      for (std::size_t r = 0; r < rows; ++r)
        softmax_line_backward(y.data().data() + r * k, y.grad().data() + r * k,
                              x.mutable_grad().data() + r * k, k, 1);
    });
  }
  return y;
}

Tensor log_softmax(Tape& tape, const Tensor& x) {
  const std::size_t len = x.dim(-1);
  const std::size_t rows = len == 0 ? 0 : x.numel() / len;
  std::vector<double> out(x.numel());
  const auto src = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = src.data() + r * len;
    const double mx = *std::max_element(in, in + len);
    double total = 0.0;
    for (std::size_t j = 0; j < len; ++j) total += std::exp(in[j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < len; ++j) out[r * len + j] = in[j] - lse;
  }
  const bool track = tracks(tape, {&x});
  Tensor y = result(x.shape(), std::move(out), track);
  if (track) {
    tape.record([x, y, rows, len]() {
      auto gx = x.mutable_grad();
      const auto gy = y.grad();
      const auto yv = y.data();
      for (std::size_t r = 0; r < rows; ++r) {
        double total = 0.0;
        for (std::size_t j = 0; j < len; ++j) total += gy[r * len + j];
        for (std::size_t j = 0; j < len; ++j)
          gx[r * len + j] += gy[r * len + j] - std::exp(yv[r * len + j]) * total;
      }
    });
  }
  return y;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = x.dim(-1);
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d})
    throw DimensionError("layer_norm gain/bias " + shape_string(gain.shape()) + "/" +
                         shape_string(bias.shape()) + " do not match last dim of " + shape_string(x.shape()));
  const std::size_t rows = d == 0 ? 0 : x.numel() / d;
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  const auto src = x.data();
  const auto g = gain.data();
  const auto b = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = src.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (in[j] - mean) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = g[j] * h + b[j];
    }
  }
  const bool track = tracks(tape, {&x, &gain, &bias});
  Tensor y = result(x.shape(), std::move(out), track);
  if (track) {
    tape.record([x, gain, bias, y, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d]() {
      const auto gy = y.grad();
      const auto g = gain.data();
      std::vector<double> dxhat(d);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gyr = gy.data() + r * d;
        const double* h = xhat.data() + r * d;
        if (gain.requires_grad())
          for (std::size_t j = 0; j < d; ++j) gain.mutable_grad()[j] += gyr[j] * h[j];
        if (bias.requires_grad())
          for (std::size_t j = 0; j < d; ++j) bias.mutable_grad()[j] += gyr[j];
        if (!x.requires_grad()) continue;
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          dxhat[j] = gyr[j] * g[j];
          mean_dh += dxhat[j];
          mean_dh_h += dxhat[j] * h[j];
        }
        mean_dh /= static_cast<double>(d);
        mean_dh_h /= static_cast<double>(d);
        double* gx = x.mutable_grad().data() + r * d;
        for (std::size_t j = 0; j < d; ++j) gx[j] += inv_std[r] * (dxhat[j] - mean_dh - h[j] * mean_dh_h);
      }
    });
  }
  return y;
}

Tensor dropout(Tape& tape, const Tensor& x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must be in [0,1), got " + std::to_string(p));
  if (mode == Mode::Eval || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> factor(x.numel());
  for (double& f : factor) f = rng.uniform() < p ? 0.0 : keep_scale;
  std::vector<double> out(x.numel());
  kernels::active().mul(out.size(), x.data().data(), factor.data(), out.data());
  const bool track = tracks(tape, {&x});
  Tensor y = result(x.shape(), std::move(out), track);
  if (track) {
    tape.record([x, y, factor = std::move(factor)]() {
      auto gx = x.mutable_grad();
      const auto gy = y.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * factor[i];
    });
  }
  return y;
}

Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::size_t> rows) {
  require_rank(table, 2, "gather_rows");
  const std::size_t n = table.dim(0), d = table.dim(1);
  std::vector<double> out(rows.size() * d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n)
      throw UsageError("row index " + std::to_string(rows[r]) + " out of range for " + std::to_string(n) + " rows");
    std::copy_n(table.data().data() + rows[r] * d, d, out.data() + r * d);
  }
  const bool track = tracks(tape, {&table});
  Tensor y = result({rows.size(), d}, std::move(out), track);
  if (track) {
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    tape.record([table, y, idx = std::move(idx), d]() {
      const auto& kt = kernels::active();
      for (std::size_t r = 0; r < idx.size(); ++r)
        kt.axpy(d, 1.0, y.grad().data() + r * d, table.mutable_grad().data() + idx[r] * d);
    });
  }
  return y;
}

Tensor scatter_add_rows(Tape& tape, const Tensor& src, std::span<const std::size_t> rows, std::size_t out_rows) {
  require_rank(src, 2, "scatter_add_rows");
  if (src.dim(0) != rows.size())
    throw DimensionError("scatter_add_rows: " + std::to_string(rows.size()) + " indices for " +
                         shape_string(src.shape()));
  const std::size_t d = src.dim(1);
  std::vector<double> out(out_rows * d, 0.0);
  const auto& kt = kernels::active();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= out_rows) throw UsageError("scatter row index out of range");
    kt.axpy(d, 1.0, src.data().data() + r * d, out.data() + rows[r] * d);
  }
  const bool track = tracks(tape, {&src});
  Tensor y = result({out_rows, d}, std::move(out), track);
  if (track) {
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    tape.record([src, y, idx = std::move(idx), d]() {
      const auto& kt = kernels::active();
      for (std::size_t r = 0; r < idx.size(); ++r)
        kt.axpy(d, 1.0, y.grad().data() + idx[r] * d, src.mutable_grad().data() + r * d);
    });
  }
  return y;
}

Tensor split_heads(Tape& tape, const Tensor& x, std::size_t heads) {
  require_rank(x, 2, "split_heads");
  const std::size_t n = x.dim(0), width = x.dim(1);
  if (heads == 0 || width % heads != 0)
    throw DimensionError("width " + std::to_string(width) + " not divisible into " + std::to_string(heads) + " heads");
  const std::size_t dh = width / heads;
  std::vector<double> out(x.numel());
  const auto src = x.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t h = 0; h < heads; ++h)
      std::copy_n(src.data() + i * width + h * dh, dh, out.data() + (h * n + i) * dh);
  const bool track = tracks(tape, {&x});
  Tensor y = result({heads, n, dh}, std::move(out), track);
  if (track) {
    tape.record([x, y, n, heads, dh, width]() {
      const auto& kt = kernels::active();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t h = 0; h < heads; ++h)
          kt.axpy(dh, 1.0, y.grad().data() + (h * n + i) * dh, x.mutable_grad().data() + i * width + h * dh);
    });
  }
  return y;
}

Tensor merge_heads(Tape& tape, const Tensor& x) {
  require_rank(x, 3, "merge_heads");
  const std::size_t heads = x.dim(0), n = x.dim(1), dh = x.dim(2);
  const std::size_t width = heads * dh;
  std::vector<double> out(x.numel());
  const auto src = x.data();
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(src.data() + (h * n + i) * dh, dh, out.data() + i * width + h * dh);
  const bool track = tracks(tape, {&x});
  Tensor y = result({n, width}, std::move(out), track);
  if (track) {
    tape.record([x, y, n, heads, dh, width]() {
      const auto& kt = kernels::active();
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t i = 0; i < n; ++i)
          kt.axpy(dh, 1.0, y.grad().data() + i * width + h * dh, x.mutable_grad().data() + (h * n + i) * dh);
    });
  }
  return y;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  const bool track = tracks(tape, {&x});
  Tensor y = result({}, {total}, track);
  if (track) {
    tape.record([x, y]() {
      const double g = y.grad()[0];
      for (double& v : x.mutable_grad()) v += g;
    });
  }
  return y;
}

Tensor stack_padded(Tape& tape, std::span<const Tensor> rows, std::size_t max_len) {
  if (rows.empty()) throw DimensionError("stack_padded of an empty list");
  const std::size_t v = rows.front().dim(-1);
  bool any_grad = false;
  for (const Tensor& r : rows) {
    if (r.rank() != 2 || r.dim(1) != v || r.dim(0) > max_len)
      throw DimensionError("stack_padded: row block " + shape_string(r.shape()) + " incompatible with [" +
                           std::to_string(max_len) + "," + std::to_string(v) + "]");
    any_grad = any_grad || r.requires_grad();
  }
  std::vector<double> out(rows.size() * max_len * v, 0.0);
  for (std::size_t b = 0; b < rows.size(); ++b)
    std::copy(rows[b].data().begin(), rows[b].data().end(), out.begin() + static_cast<std::ptrdiff_t>(b * max_len * v));
  const bool track = tape.recording() && any_grad;
  Tensor y = result({rows.size(), max_len, v}, std::move(out), track);
  if (track) {
    std::vector<Tensor> parts(rows.begin(), rows.end());
    tape.record([parts = std::move(parts), y, max_len, v]() {
      for (std::size_t b = 0; b < parts.size(); ++b)
        if (parts[b].requires_grad())
          accumulate(parts[b], y.grad().subspan(b * max_len * v, parts[b].numel()));
    });
  }
  return y;
}

Tensor nll_loss(Tape& tape, const Tensor& log_probs, std::span<const std::int32_t> targets,
                std::span<const std::uint8_t> mask) {
  require_rank(log_probs, 3, "nll_loss");
  const std::size_t positions = log_probs.dim(0) * log_probs.dim(1);
  const std::size_t v = log_probs.dim(2);
  if (targets.size() != positions || mask.size() != positions)
    throw DimensionError("nll_loss: targets/mask length does not match " + shape_string(log_probs.shape()));
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t p = 0; p < positions; ++p) {
    if (!mask[p]) continue;
    if (targets[p] < 0 || static_cast<std::size_t>(targets[p]) >= v)
      throw UsageError("target id " + std::to_string(targets[p]) + " outside vocabulary of " + std::to_string(v));
    total -= log_probs.data()[p * v + static_cast<std::size_t>(targets[p])];
    ++count;
  }
  if (count == 0) throw DataError("nll_loss: every target position is padding");
  const double inv = 1.0 / static_cast<double>(count);
  const bool track = tracks(tape, {&log_probs});
  Tensor y = result({}, {total * inv}, track);
  if (track) {
    std::vector<std::int32_t> tgt(targets.begin(), targets.end());
    std::vector<std::uint8_t> msk(mask.begin(), mask.end());
    tape.record([log_probs, y, tgt = std::move(tgt), msk = std::move(msk), v, inv]() {
      const double g = y.grad()[0] * inv;
      auto gl = log_probs.mutable_grad();
      for (std::size_t p = 0; p < tgt.size(); ++p)
        if (msk[p]) gl[p * v + static_cast<std::size_t>(tgt[p])] -= g;
    });
  }
  return y;
}

}  // namespace ops
}  // namespace gmnmt
