#include "convmamba/scan.hpp"

#include <cmath>
#include <vector>

#include "convmamba/error.hpp"

namespace convmamba {
namespace {

struct ScanDims {
  std::size_t batch, len, inner, state;
};

ScanDims DimsOf(const Shape& u, const Shape& delta, const Shape& a,
                const Shape& b_t, const Shape& c_t, const Shape& skip) {
  auto bad = [&] {
    Fail(ErrorKind::kDimension,
         "selective scan shapes disagree: u " + ShapeString(u) + ", delta " +
             ShapeString(delta) + ", A " + ShapeString(a) + ", B " +
             ShapeString(b_t) + ", C " + ShapeString(c_t) + ", D " +
             ShapeString(skip));
  };
  if (u.size() != 3 || a.size() != 2 || b_t.size() != 3) bad();
  ScanDims d{u[0], u[1], u[2], a[1]};
  if (delta != u || a[0] != d.inner || b_t != Shape{d.batch, d.len, d.state} ||
      c_t != b_t || skip != Shape{d.inner}) {
    bad();
  }
  return d;
}

// Shared forward; when states is non-null it receives h[b,t,d,n].
Tensor ScanForward(const Tensor& u, const Tensor& delta, const Tensor& a,
                   const Tensor& b_t, const Tensor& c_t, const Tensor& skip,
                   const ScanDims& dm, std::vector<double>* states) {
  const auto [nb, len, ni, ns] = dm;
  Tensor y(Shape{nb, len, ni});
  if (states) states->assign(nb * len * ni * ns, 0.0);
  std::vector<double> h(ni * ns);
  for (std::size_t b = 0; b < nb; ++b) {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t row = b * len + t;
      const double* bt = b_t.data().data() + row * ns;
      const double* ct = c_t.data().data() + row * ns;
      for (std::size_t d = 0; d < ni; ++d) {
        const double dt = delta[row * ni + d];
        const double ut = u[row * ni + d];
        double* hd = &h[d * ns];
        double acc = 0.0;
        for (std::size_t n = 0; n < ns; ++n) {
          hd[n] = std::exp(dt * a[d * ns + n]) * hd[n] + dt * bt[n] * ut;
          acc += ct[n] * hd[n];
        }
        y[row * ni + d] = acc + skip[d] * ut;
        if (states) {
          std::copy(hd, hd + ns, states->begin() + static_cast<std::ptrdiff_t>((row * ni + d) * ns));
        }
      }
    }
  }
  return y;
}

}  // namespace

Discretized Discretize(const Tensor& delta, const Tensor& a,
                       const Tensor& b_t) {
  if (delta.rank() != 3 || a.rank() != 2 || b_t.rank() != 3 ||
      a.dim(0) != delta.dim(2) || b_t.dim(0) != delta.dim(0) ||
      b_t.dim(1) != delta.dim(1) || b_t.dim(2) != a.dim(1)) {
    Fail(ErrorKind::kDimension, "discretize shapes disagree: delta " +
                                    ShapeString(delta.shape()) + ", A " +
                                    ShapeString(a.shape()) + ", B " +
                                    ShapeString(b_t.shape()));
  }
  const std::size_t nb = delta.dim(0), len = delta.dim(1), ni = delta.dim(2),
                    ns = a.dim(1);
  Discretized out{Tensor(Shape{nb, len, ni, ns}), Tensor(Shape{nb, len, ni, ns})};
  for (std::size_t row = 0; row < nb * len; ++row)
    for (std::size_t d = 0; d < ni; ++d) {
      const double dt = delta[row * ni + d];
      if (!(dt > 0.0)) {
        Fail(ErrorKind::kContract, "discretize needs delta > 0, got " +
                                       std::to_string(dt));
      }
      for (std::size_t n = 0; n < ns; ++n) {
        const std::size_t i = (row * ni + d) * ns + n;
        out.a_bar[i] = std::exp(dt * a[d * ns + n]);
        out.b_bar[i] = dt * b_t[row * ns + n];
      }
    }
  return out;
}

void ValidateScanInputs(const ScanInputs& in) {
  DimsOf(in.u.shape(), in.delta.shape(), in.a.shape(), in.b_t.shape(),
         in.c_t.shape(), in.skip.shape());
  for (double v : in.delta.data()) {
    if (!(v > 0.0)) Fail(ErrorKind::kContract, "scan needs delta > 0");
  }
  for (double v : in.a.data()) {
    if (v > 0.0) Fail(ErrorKind::kContract, "scan needs A <= 0");
  }
}

Tensor SelectiveScanSequential(const ScanInputs& in) {
  ValidateScanInputs(in);
  const ScanDims dm = DimsOf(in.u.shape(), in.delta.shape(), in.a.shape(),
                             in.b_t.shape(), in.c_t.shape(), in.skip.shape());
  return ScanForward(in.u, in.delta, in.a, in.b_t, in.c_t, in.skip, dm, nullptr);
}

void AffinePrefixScan(std::vector<double>& coeff, std::vector<double>& offset) {
  if (coeff.size() != offset.size()) {
    Fail(ErrorKind::kDimension, "affine scan arrays differ in length");
  }
  const std::size_t len = coeff.size();
  if (len == 0) return;
  std::size_t padded = 1;
  while (padded < len) padded <<= 1;

  // Identity element is (1, 0). Combining earlier (a1, b1) with later
  // (a2, b2) gives (a1 * a2, a2 * b1 + b2).
  std::vector<double> a(padded, 1.0), b(padded, 0.0);
  std::copy(coeff.begin(), coeff.end(), a.begin());
  std::copy(offset.begin(), offset.end(), b.begin());

  for (std::size_t stride = 1; stride < padded; stride <<= 1) {
    for (std::size_t i = 2 * stride - 1; i < padded; i += 2 * stride) {
      const std::size_t left = i - stride;
      b[i] = a[i] * b[left] + b[i];
      a[i] = a[left] * a[i];
    }
  }
  a[padded - 1] = 1.0;
  b[padded - 1] = 0.0;
  for (std::size_t stride = padded >> 1; stride >= 1; stride >>= 1) {
    for (std::size_t i = 2 * stride - 1; i < padded; i += 2 * stride) {
      const std::size_t left = i - stride;
      const double la = a[left], lb = b[left];
      a[left] = a[i];
      b[left] = b[i];
      // prefix (a[i], b[i]) first, then the left subtree total.
      b[i] = la * b[i] + lb;
      a[i] = a[i] * la;
    }
  }
  // a, b now hold exclusive prefixes; fold in each element.
  for (std::size_t t = 0; t < len; ++t) {
    const double ea = coeff[t], eb = offset[t];
    offset[t] = ea * b[t] + eb;
    coeff[t] = a[t] * ea;
  }
}

Tensor SelectiveScanParallel(const ScanInputs& in) {
  ValidateScanInputs(in);
  const auto [nb, len, ni, ns] =
      DimsOf(in.u.shape(), in.delta.shape(), in.a.shape(), in.b_t.shape(),
             in.c_t.shape(), in.skip.shape());
  Tensor y(Shape{nb, len, ni});
  std::vector<double> coeff(len), offset(len);
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t d = 0; d < ni; ++d) {
      for (std::size_t n = 0; n < ns; ++n) {
        for (std::size_t t = 0; t < len; ++t) {
          const std::size_t row = b * len + t;
          const double dt = in.delta[row * ni + d];
          coeff[t] = std::exp(dt * in.a[d * ns + n]);
          offset[t] = dt * in.b_t[row * ns + n] * in.u[row * ni + d];
        }
        AffinePrefixScan(coeff, offset);
        for (std::size_t t = 0; t < len; ++t) {
          const std::size_t row = b * len + t;
          y[row * ni + d] += in.c_t[row * ns + n] * offset[t];
        }
      }
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t row = b * len + t;
        y[row * ni + d] += in.skip[d] * in.u[row * ni + d];
      }
    }
  return y;
}

Var SelectiveScan(const Var& u, const Var& delta, const Var& a, const Var& b_t,
                  const Var& c_t, const Var& skip) {
  const ScanDims dm = DimsOf(u.shape(), delta.shape(), a.shape(), b_t.shape(),
                             c_t.shape(), skip.shape());
  const Tensor& uv = u.value();
  const Tensor& dv = delta.value();
  const Tensor& av = a.value();
  const Tensor& bv = b_t.value();
  const Tensor& cv = c_t.value();
  const Tensor& sv = skip.value();
  std::vector<double> states;
  Tensor y = ScanForward(uv, dv, av, bv, cv, sv, dm, &states);
  return u.tape()->Record(
      "selective_scan", std::move(y), {u, delta, a, b_t, c_t, skip},
      [uv, dv, av, bv, cv, sv, dm, states = std::move(states)](
          const Tensor& gy, std::span<Tensor* const> grads) {
        const auto [nb, len, ni, ns] = dm;
        Tensor* gu = grads[0];
        Tensor* gdelta = grads[1];
        Tensor* ga = grads[2];
        Tensor* gb = grads[3];
        Tensor* gc = grads[4];
        Tensor* gskip = grads[5];
        std::vector<double> gh(ni * ns);
        for (std::size_t b = 0; b < nb; ++b) {
          std::fill(gh.begin(), gh.end(), 0.0);
          for (std::size_t t = len; t-- > 0;) {
            const std::size_t row = b * len + t;
            for (std::size_t d = 0; d < ni; ++d) {
              const std::size_t idx = row * ni + d;
              const double g = gy[idx];
              const double ut = uv[idx];
              const double dt = dv[idx];
              if (gskip) (*gskip)[d] += g * ut;
              double du = g * sv[d];
              double ddelta = 0.0;
              const double* h = &states[idx * ns];
              const double* hprev = t > 0 ? &states[((row - 1) * ni + d) * ns] : nullptr;
              for (std::size_t n = 0; n < ns; ++n) {
                double& ghn = gh[d * ns + n];
                ghn += g * cv[row * ns + n];
                if (gc) (*gc)[row * ns + n] += g * h[n];
                const double an = av[d * ns + n];
                const double abar = std::exp(dt * an);
                const double hp = hprev ? hprev[n] : 0.0;
                const double d_abar = ghn * hp;
                const double bn = bv[row * ns + n];
                ddelta += d_abar * abar * an + ghn * bn * ut;
                if (ga) (*ga)[d * ns + n] += d_abar * abar * dt;
                if (gb) (*gb)[row * ns + n] += ghn * dt * ut;
                du += ghn * dt * bn;
                ghn *= abar;
              }
              if (gu) (*gu)[idx] += du;
              if (gdelta) (*gdelta)[idx] += ddelta;
            }
          }
        }
      });
}

}  // namespace convmamba
