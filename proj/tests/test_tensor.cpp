#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diffgan/error.hpp"
#include "diffgan/rng.hpp"
#include "diffgan/tensor.hpp"

using namespace diffgan;

TEST_CASE("shape/data agreement is enforced") {
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.at({1, 2}) == 0.0);
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DimError);
    CHECK_THROWS_AS(Tensor({0, 3}), ArgError);
    CHECK_THROWS_AS(Tensor({-1}), ArgError);
    CHECK_THROWS_AS(Tensor(std::vector<int>{}), ArgError);
}

TEST_CASE("row-major indexing") {
    Tensor t({2, 2}, {1, 2, 3, 4});
    CHECK(t.at({0, 0}) == 1);
    CHECK(t.at({0, 1}) == 2);
    CHECK(t.at({1, 0}) == 3);
    CHECK(t.at({1, 1}) == 4);
}

TEST_CASE("rng streams are deterministic and independent") {
    Rng a(42, 7), b(42, 7), c(42, 8);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const uint64_t va = a.next_u64();
        all_equal = all_equal && (va == b.next_u64());
        any_diff = any_diff || (va != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("randn: same (seed, stream) twice is bit-identical") {
    Rng r1(123, 5), r2(123, 5);
    Tensor a = Tensor::randn(r1, {4, 7});
    Tensor b = Tensor::randn(r2, {4, 7});
    for (int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("randn: distinct stream ids differ") {
    Rng r1(123, 5), r2(123, 6);
    Tensor a = Tensor::randn(r1, {16});
    Tensor b = Tensor::randn(r2, {16});
    bool differ = false;
    for (int64_t i = 0; i < a.numel(); ++i) differ = differ || (a[i] != b[i]);
    CHECK(differ);
}

TEST_CASE("randn moments at n=1e6") {
    Rng rng(2024, 1);
    const int64_t n = 1000000;
    Tensor t = Tensor::randn(rng, {1000, 1000});
    double mean = 0.0;
    for (int64_t i = 0; i < n; ++i) mean += t[i];
    mean /= double(n);
    double var = 0.0;
    for (int64_t i = 0; i < n; ++i) var += (t[i] - mean) * (t[i] - mean);
    var /= double(n - 1);
    CHECK(std::fabs(mean) < 4e-3);
    CHECK(std::fabs(var - 1.0) < 0.01);
}

TEST_CASE("randn rejects zero-sized shapes") {
    Rng rng(1, 1);
    CHECK_THROWS_AS(Tensor::randn(rng, {0}), ArgError);
    CHECK_THROWS_AS(Tensor::randn(rng, {3, 0, 2}), ArgError);
}

TEST_CASE("uniform_int covers range without bias drift") {
    Rng rng(7, 3);
    int counts[4] = {0, 0, 0, 0};
    for (int i = 0; i < 40000; ++i) counts[rng.uniform_int(0, 3)]++;
    for (int c : counts) CHECK(std::fabs(c - 10000.0) < 400.0);
}

TEST_CASE("quantize_f32 is idempotent") {
    Rng rng(5, 5);
    Tensor t = Tensor::randn(rng, {64});
    t.quantize_f32();
    Tensor once = t;
    t.quantize_f32();
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(t[i] == once[i]);
}
