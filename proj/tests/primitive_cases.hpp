#pragma once

// Table of differentiable primitives with input samplers and scalar-loss
// builders, shared by the unit suite and the acceptance gradient oracle.

#include <functional>
#include <string>
#include <vector>

#include "mlgc/tape.hpp"
#include "test_support.hpp"

namespace mlgc::testing {

struct PrimitiveCase {
    std::string name;
    int rows, cols;
    std::function<Matrix(std::mt19937_64&)> sample;                // input generator
    std::function<DiffTensor(Tape&, DiffTensor)> build;            // scalar loss
};

Matrix sample_uniform(int r, int c, double lo, double hi, std::mt19937_64& gen) {
    return random_matrix(r, c, gen, lo, hi);
}

// Keep samples away from the kinks of relu/clamp so finite differences
// stay valid.
Matrix sample_away_from(int r, int c, const std::vector<double>& kinks, std::mt19937_64& gen) {
    Matrix m = random_matrix(r, c, gen, -1.0, 1.0);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            for (double k : kinks)
                if (std::abs(m(i, j) - k) < 0.1) m(i, j) += m(i, j) >= k ? 0.15 : -0.15;
    return m;
}

std::vector<PrimitiveCase> make_cases(std::uint64_t seed) {
    auto gen = rng::engine(rng::derive(seed, 0xca5e5ULL));
    std::vector<PrimitiveCase> cases;

    auto uniform = [](int r, int c, double lo = -1.0, double hi = 1.0) {
        return [=](std::mt19937_64& g) { return sample_uniform(r, c, lo, hi, g); };
    };

    const Matrix c34 = random_matrix(3, 4, gen);
    const Matrix c34b = random_matrix(3, 4, gen);
    const Matrix c43 = random_matrix(4, 3, gen);
    const Matrix c31 = random_matrix(3, 1, gen);
    const Matrix c14 = random_matrix(1, 4, gen);
    const Matrix c24 = random_matrix(2, 4, gen);
    const Matrix c99 = random_matrix(9, 6, gen);
    const Matrix c54 = random_matrix(5, 4, gen);
    const Matrix cden = random_matrix(3, 4, gen, 0.5, 1.5);

    cases.push_back({"add", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.add(x, t.constant(c34)));
                     }});
    cases.push_back({"add_row_broadcast", 1, 4, uniform(1, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.add(t.constant(c34), x), t.constant(c34b)));
                     }});
    cases.push_back({"add_scalar_broadcast", 1, 1, uniform(1, 1), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.add(t.constant(c34), x), t.constant(c34b)));
                     }});
    cases.push_back({"sub_left", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.sub(x, t.constant(c34)), t.constant(c34b)));
                     }});
    cases.push_back({"sub_right", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.sub(t.constant(c34), x), t.constant(c34b)));
                     }});
    cases.push_back({"mul", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(x, t.constant(c34)));
                     }});
    cases.push_back({"mul_row_broadcast", 1, 4, uniform(1, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.mul(t.constant(c34), x), t.constant(c34b)));
                     }});
    cases.push_back({"divide_numerator", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.divide(x, t.constant(cden)));
                     }});
    cases.push_back({"divide_denominator", 3, 4, uniform(3, 4, 0.5, 1.5),
                     [=](Tape& t, DiffTensor x) {
                         return t.sum(t.divide(t.constant(c34), x));
                     }});
    cases.push_back({"affine", 3, 4, uniform(3, 4), [](Tape& t, DiffTensor x) {
                         return t.sum(t.affine(x, 1.7, -0.3));
                     }});
    cases.push_back({"matmul_left", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.matmul(x, t.constant(c43)));
                     }});
    cases.push_back({"matmul_right", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.matmul(t.constant(c43), x));
                     }});
    cases.push_back({"spmm", 3, 4, uniform(3, 4), [](Tape& t, DiffTensor x) {
                         // Asymmetric sparse operand exercises the transpose
                         // in the backward rule.
                         std::vector<Eigen::Triplet<double>> trip{{0, 1, 2.0},
                                                                  {1, 2, -1.0},
                                                                  {2, 0, 0.5},
                                                                  {2, 2, 1.5}};
                         SparseMatrix s(3, 3);
                         s.setFromTriplets(trip.begin(), trip.end());
                         return t.sum(t.spmm(make_shared_sparse(std::move(s)), x));
                     }});
    cases.push_back({"relu", 3, 4,
                     [](std::mt19937_64& g) { return sample_away_from(3, 4, {0.0}, g); },
                     [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.relu(x), t.constant(c34)));
                     }});
    cases.push_back({"sigmoid", 3, 4, uniform(3, 4, -3.0, 3.0), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.sigmoid(x), t.constant(c34)));
                     }});
    cases.push_back({"exp", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.exp(x), t.constant(c34)));
                     }});
    cases.push_back({"log", 3, 4, uniform(3, 4, 0.5, 2.0), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.log(x), t.constant(c34)));
                     }});
    cases.push_back({"sqrt", 3, 4, uniform(3, 4, 0.5, 2.0), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.sqrt(x), t.constant(c34)));
                     }});
    cases.push_back({"softplus", 3, 4, uniform(3, 4, -3.0, 3.0), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.softplus(x), t.constant(c34)));
                     }});
    cases.push_back({"clamp", 3, 4,
                     [](std::mt19937_64& g) { return sample_away_from(3, 4, {-0.5, 0.5}, g); },
                     [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.clamp(x, -0.5, 0.5), t.constant(c34)));
                     }});
    cases.push_back({"sum", 3, 4, uniform(3, 4), [](Tape& t, DiffTensor x) { return t.sum(x); }});
    cases.push_back({"mean", 3, 4, uniform(3, 4), [](Tape& t, DiffTensor x) { return t.mean(x); }});
    cases.push_back({"row_sum", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.row_sum(x), t.constant(c31)));
                     }});
    cases.push_back({"col_sum", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.col_sum(x), t.constant(c14)));
                     }});
    cases.push_back({"broadcast_rows", 1, 4, uniform(1, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.broadcast_rows(x, 3), t.constant(c34)));
                     }});
    cases.push_back({"broadcast_cols", 3, 1, uniform(3, 1), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.broadcast_cols(x, 4), t.constant(c34)));
                     }});
    cases.push_back({"fill_like", 1, 1, uniform(1, 1), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.fill_like(x, 3, 4), t.constant(c34)));
                     }});
    cases.push_back({"concat_rows_first", 2, 4, uniform(2, 4), [=](Tape& t, DiffTensor x) {
                         Matrix weight(5, 4);
                         weight << c34, c24;
                         return t.sum(t.mul(t.concat_rows(x, t.constant(c34)), t.constant(weight)));
                     }});
    cases.push_back({"concat_rows_second", 2, 4, uniform(2, 4), [=](Tape& t, DiffTensor x) {
                         Matrix weight(5, 4);
                         weight << c34, c24;
                         return t.sum(t.mul(t.concat_rows(t.constant(c34), x), t.constant(weight)));
                     }});
    cases.push_back({"transpose", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.transpose(x), t.constant(c43)));
                     }});
    cases.push_back({"reshape", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.reshape(x, 4, 3), t.constant(c43)));
                     }});
    cases.push_back({"gather_rows", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.gather_rows(x, {2, 0, 2}), t.constant(c34)));
                     }});
    cases.push_back({"scatter_rows_add", 3, 4, uniform(3, 4), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.scatter_rows_add(x, {1, 3, 1}, 5), t.constant(c54)));
                     }});
    cases.push_back({"pairwise_concat", 3, 3, uniform(3, 3), [=](Tape& t, DiffTensor x) {
                         return t.sum(t.mul(t.pairwise_concat(x), t.constant(c99)));
                     }});
    cases.push_back({"led_quantile_distance", 3, 3, uniform(3, 3, 0.1, 1.0),
                     [](Tape& t, DiffTensor x) {
                         Matrix ref_adj(3, 3);
                         ref_adj << 1.0, 0.3, 0.0, 0.3, 1.0, 0.8, 0.0, 0.8, 1.0;
                         Vector ref = spectrum_quantiles(laplacian_spectrum(ref_adj));
                         DiffTensor sym = t.affine(t.add(x, t.transpose(x)), 0.5, 0.0);
                         return t.led_quantile_distance(sym, ref);
                     }});
    return cases;
}

double loss_value(const PrimitiveCase& c, const Matrix& x) {
    Tape tape;
    return c.build(tape, tape.constant(x)).scalar();
}

}  // namespace mlgc::testing
