#pragma once

#include <boost/multiprecision/cpp_int.hpp>

namespace ddest {

using BigInt = boost::multiprecision::cpp_int;

/// Exact binomial coefficient; zero when k < 0 or k > n.
BigInt binomial(long long n, long long k);

/// Number of product supports with |delays| = d and |Dopplers| = r:
/// C(L, d) * C(B, r).
BigInt structured_family_size(int L, int B, int d, int r);

/// Number of unstructured supports of the same size: C(L*B, d*r).
BigInt unstructured_family_size(int L, int B, int d, int r);

}  // namespace ddest
