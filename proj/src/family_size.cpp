#include "ddest/family_size.hpp"

#include <algorithm>

namespace ddest {

BigInt binomial(long long n, long long k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt acc = 1;
  // acc stays an exact binomial C(n-k+i, i) after each step.
  for (long long i = 1; i <= k; ++i) {
    acc *= n - k + i;
    acc /= i;
  }
  return acc;
}

BigInt structured_family_size(int L, int B, int d, int r) { return binomial(L, d) * binomial(B, r); }

BigInt unstructured_family_size(int L, int B, int d, int r) {
  return binomial(static_cast<long long>(L) * B, static_cast<long long>(d) * r);
}

}  // namespace ddest
