/*
 * Copyright 2026 The psqp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


// Momentum series checks shared by the optimizer unit tests and the
// acceptance binary.
//
// The first three bounds are the closed-form infinite sums, so the slack of a
// K-term partial sum is its tail, roughly beta^K K^2. For K = 1e5 that is far
// below double resolution (2^-100000 for beta = 0.5), so those sums run in
// MPFR with enough bits to resolve the tail. The square-root bounds are loose
// and a double sum settles them.

#pragma once

#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace series {

struct Outcome {
  std::string name;
  double beta = 0.0;
  double sum = 0.0;
  double bound = 0.0;
  double log10_slack = 0.0;  // log10(bound - sum); -inf when the slack is not positive
  bool positive = false;     // slack exceeds the worst-case rounding error of the sum
};

namespace detail {

class Big {
 public:
  explicit Big(mpfr_prec_t prec) {
    mpfr_init2(v_, prec);
    mpfr_set_zero(v_, 1);
  }
  ~Big() { mpfr_clear(v_); }
  Big(const Big&) = delete;
  Big& operator=(const Big&) = delete;
  mpfr_ptr get() { return v_; }

 private:
  mpfr_t v_;
};

inline double log10_of(mpfr_ptr x) {
  if (mpfr_sgn(x) <= 0) return -INFINITY;
  long exp = 0;
  const double mant = mpfr_get_d_2exp(&exp, x, MPFR_RNDN);
  return std::log10(mant) + static_cast<double>(exp) * std::log10(2.0);
}

}  // namespace detail

/// sum_{k<K} beta^k, beta^k k and beta^k k^2 against 1/(1-beta),
/// beta/(1-beta)^2 and beta(1+beta)/(1-beta)^3.
///
/// Each sum runs in Horner form from the last term down, a <- beta a + k^p.
/// A rounding at term k reaches the total scaled by beta^k, so the working
/// precision only has to cover (K - k) log2(1/beta) bits plus a guard. The
/// precision grows as k falls, which halves the cost of a fixed-width pass.
/// beta = 1/2 is summed exactly in integer arithmetic instead.
inline std::vector<Outcome> power_sums(double beta, std::size_t terms) {
  using detail::Big;
  constexpr mpfr_prec_t kGuard = 192;
  const double bits_per_term = -std::log2(beta);
  const auto full = static_cast<mpfr_prec_t>(std::ceil(static_cast<double>(terms) * bits_per_term)) + kGuard;

  Big b(full), q(full), bound(full), slack(full), err(full);
  mpfr_set_d(b.get(), beta, MPFR_RNDN);  // exact: beta is a double
  mpfr_ui_sub(q.get(), 1, b.get(), MPFR_RNDN);

  const char* names[] = {"sum beta^k", "sum beta^k k", "sum beta^k k^2"};
  std::vector<Outcome> out;
  for (int power = 0; power < 3; ++power) {
    auto coeff = [power](std::size_t k) {
      unsigned long c = 1;
      for (int i = 0; i < power; ++i) c *= static_cast<unsigned long>(k);
      return c;
    };
    mpfr_t acc;
    mpfr_init2(acc, full);
    double largest = 0.0;  // stays 0 on the exact path
    if (beta == 0.5) {
      // Dyadic case: sum_k c_k 2^(K-1-k) is an integer, built limb by limb.
      std::vector<std::uint64_t> limbs(terms / 64 + 3, 0);
      for (std::size_t k = 0; k < terms; ++k) {
        const std::size_t shift = terms - 1 - k;
        const unsigned __int128 v = static_cast<unsigned __int128>(coeff(k)) << (shift % 64);
        std::size_t i = shift / 64;
        unsigned __int128 carry = v;
        while (carry != 0) {
          const unsigned __int128 t = static_cast<unsigned __int128>(limbs[i]) + static_cast<std::uint64_t>(carry);
          limbs[i++] = static_cast<std::uint64_t>(t);
          carry = (carry >> 64) + (t >> 64);
        }
      }
      mpz_t z;
      mpz_init(z);
      mpz_import(z, limbs.size(), -1, sizeof(std::uint64_t), 0, 0, limbs.data());
      mpfr_set_z_2exp(acc, z, -static_cast<long>(terms - 1), MPFR_RNDN);  // exact: full exceeds its bit length
      mpz_clear(z);
    } else {
      mpfr_prec_t prec = 2 * kGuard;
      mpfr_set_prec(acc, prec);
      mpfr_set_zero(acc, 1);
      for (std::size_t k = terms; k-- > 0;) {
        const auto need =
            static_cast<mpfr_prec_t>(std::ceil(static_cast<double>(terms - k) * bits_per_term)) + kGuard;
        if (need > prec) {
          prec = std::min(full, need + 4096);
          mpfr_prec_round(acc, prec, MPFR_RNDN);  // widening is exact
        }
        mpfr_mul_d(acc, acc, beta, MPFR_RNDN);  // linear: beta has 53 bits
        mpfr_add_ui(acc, acc, coeff(k), MPFR_RNDN);
        largest = std::max(largest, mpfr_get_d(acc, MPFR_RNDU));
      }
    }

    switch (power) {
      case 0: mpfr_ui_div(bound.get(), 1, q.get(), MPFR_RNDN); break;
      case 1:
        mpfr_div(bound.get(), b.get(), q.get(), MPFR_RNDN);
        mpfr_div(bound.get(), bound.get(), q.get(), MPFR_RNDN);
        break;
      default:
        mpfr_add_ui(bound.get(), b.get(), 1, MPFR_RNDN);
        mpfr_mul(bound.get(), bound.get(), b.get(), MPFR_RNDN);
        for (int i = 0; i < 3; ++i) mpfr_div(bound.get(), bound.get(), q.get(), MPFR_RNDN);
    }
    mpfr_sub(slack.get(), bound.get(), acc, MPFR_RNDN);

    // Worst case: two roundings per term, each at most 2^-(guard) beta^K of the
    // running value once scaled back to the total, plus a few ulps of the bound.
    mpfr_set_d(err.get(), 2.0 * static_cast<double>(terms) * largest, MPFR_RNDU);
    mpfr_mul_2si(err.get(), err.get(), -(kGuard - 1), MPFR_RNDU);
    Big beta_k(full);
    mpfr_pow_ui(beta_k.get(), b.get(), terms, MPFR_RNDU);
    mpfr_mul(err.get(), err.get(), beta_k.get(), MPFR_RNDU);
    Big ulps(full);
    mpfr_mul_2si(ulps.get(), bound.get(), -(full - 4), MPFR_RNDU);
    mpfr_add(err.get(), err.get(), ulps.get(), MPFR_RNDU);

    Outcome o;
    o.name = names[power];
    o.beta = beta;
    o.sum = mpfr_get_d(acc, MPFR_RNDN);
    o.bound = mpfr_get_d(bound.get(), MPFR_RNDN);
    o.log10_slack = detail::log10_of(slack.get());
    o.positive = mpfr_cmp(slack.get(), err.get()) > 0;
    out.push_back(o);
    mpfr_clear(acc);
  }
  return out;
}

/// sum_{j<K} beta^j sqrt(j+1) <= 2/(1-beta)^{3/2} and
/// sum_{j<K} beta^j sqrt(j)(j+1) <= 4 beta/(1-beta)^{5/2}.
inline std::vector<Outcome> root_sums(double beta, std::size_t terms) {
  double h1 = 0.0, h2 = 0.0, p = 1.0;
  for (std::size_t j = 0; j < terms; ++j, p *= beta) {
    const double jj = static_cast<double>(j);
    h1 += p * std::sqrt(jj + 1.0);
    h2 += p * std::sqrt(jj) * (jj + 1.0);
  }
  const double q = 1.0 - beta;
  const double bounds[] = {2.0 / std::pow(q, 1.5), 4.0 * beta / std::pow(q, 2.5)};
  const double sums[] = {h1, h2};
  const char* names[] = {"sum beta^j sqrt(j+1)", "sum beta^j sqrt(j)(j+1)"};
  std::vector<Outcome> out;
  for (int i = 0; i < 2; ++i) {
    const double slack = bounds[i] - sums[i];
    // Recursive summation error stays below K ulps of the total.
    const double err = static_cast<double>(terms) * 4.0 * 1.1102230246251565e-16 * bounds[i];
    out.push_back({names[i], beta, sums[i], bounds[i], slack > 0 ? std::log10(slack) : -INFINITY, slack > err});
  }
  return out;
}

inline std::vector<Outcome> all(double beta, std::size_t terms) {
  auto out = power_sums(beta, terms);
  for (auto& o : root_sums(beta, terms)) out.push_back(o);
  return out;
}

}  // namespace series
