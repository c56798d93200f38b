#ifndef CCV_TESTS_GEN_HPP
#define CCV_TESTS_GEN_HPP

// Small hand-rolled generators for property tests. Seeded std::mt19937_64 so the
// generators stay independent of the library RNG under test.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace gen {

class Source {
public:
    explicit Source(std::uint64_t seed) : eng_(seed) {}

    std::size_t size(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(eng_);
    }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
    double prob() { return real(1e-6, 1.0 - 1e-6); }
    bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(eng_); }

    std::vector<double> reals(std::size_t n, double lo, double hi) {
        std::vector<double> v(n);
        for (auto& x : v) x = real(lo, hi);
        return v;
    }

    // Values drawn from a small lattice, so ties are common.
    std::vector<double> tied_reals(std::size_t n, int levels) {
        std::vector<double> v(n);
        std::uniform_int_distribution<int> d(0, levels - 1);
        for (auto& x : v) x = static_cast<double>(d(eng_));
        return v;
    }

    std::vector<double> pvalues(std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = coin() ? prob() : real(1e-6, 0.05);
        return v;
    }

    std::vector<double> sorted_reals(std::size_t n, double lo, double hi) {
        auto v = reals(n, lo, hi);
        std::sort(v.begin(), v.end());
        return v;
    }

    template <class T>
    void shuffle(std::vector<T>& v) { std::shuffle(v.begin(), v.end(), eng_); }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

// Runs prop(source, case_index) over `cases` independent cases.
template <class Prop>
void for_all(std::size_t cases, std::uint64_t seed, Prop&& prop) {
    for (std::size_t c = 0; c < cases; ++c) {
        Source src(seed * 0x9e3779b97f4a7c15ULL + c);
        prop(src, c);
    }
}

} // namespace gen

#endif // CCV_TESTS_GEN_HPP
