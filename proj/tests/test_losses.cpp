#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mlgc/errors.hpp"
#include "mlgc/losses.hpp"
#include "test_support.hpp"

using namespace mlgc;
using namespace mlgc::testing;

TEST_CASE("bce exactness at zero logits") {
    Matrix z = Matrix::Zero(1, 1);
    Matrix y = Matrix::Ones(1, 1);
    CHECK(std::abs(bce_loss(z, y) - std::log(2.0)) < 1e-12);

    Vector w1 = Vector::Ones(1);
    CHECK(bce_loss(z, y, w1) == bce_loss(z, y));

    Vector w2 = Vector::Constant(1, 2.0);
    CHECK(std::abs(bce_loss(z, y, w2) - 2.0 * std::log(2.0)) < 1e-12);
}

TEST_CASE("bce saturates cleanly on confident correct predictions") {
    Matrix z = Matrix::Constant(1, 1, 100.0);
    Matrix y = Matrix::Ones(1, 1);
    CHECK(bce_loss(z, y) < 1e-10);
    CHECK(bce_loss(z, y) >= 0.0);
}

TEST_CASE("bce equals ln 2 at zero logits for every label pattern") {
    auto gen = rng::engine(3);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix y = random_binary(4, 5, gen);
        CHECK(std::abs(bce_loss(Matrix::Zero(4, 5), y) - std::log(2.0)) < 1e-12);
    }
}

TEST_CASE("weighted bce with all-ones weights is exactly the unweighted loss") {
    auto gen = rng::engine(17);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix z = random_matrix(3, 4, gen, -5.0, 5.0);
        Matrix y = random_binary(3, 4, gen);
        CHECK(bce_loss(z, y, Vector::Ones(4)) == bce_loss(z, y));
    }
}

TEST_CASE("softmargin examples") {
    auto gen = rng::engine(1);
    CHECK(std::abs(softmargin_loss(Matrix::Zero(2, 3), random_binary(2, 3, gen)) - std::log(2.0)) <
          1e-12);

    Matrix z = Matrix::Constant(1, 1, 50.0);
    CHECK(softmargin_loss(z, Matrix::Ones(1, 1)) < 1e-12);

    Matrix z3 = Matrix::Constant(1, 1, 3.0);
    CHECK(softmargin_loss(z3, Matrix::Zero(1, 1)) ==
          doctest::Approx(std::log(1.0 + std::exp(3.0))).epsilon(1e-12));
}

TEST_CASE("losses stay finite for huge logits") {
    for (double magnitude : {1e2, 1e3, 1e4}) {
        for (double sign : {-1.0, 1.0}) {
            Matrix z = Matrix::Constant(2, 2, sign * magnitude);
            Matrix y = Matrix::Identity(2, 2);
            CHECK(std::isfinite(bce_loss(z, y)));
            CHECK(std::isfinite(softmargin_loss(z, y)));
            CHECK(bce_loss(z, y) >= 0.0);
            CHECK(softmargin_loss(z, y) >= 0.0);
        }
    }
}

TEST_CASE("cross entropy examples") {
    Matrix uniform = Matrix::Zero(3, 4);
    Matrix onehot = Matrix::Zero(3, 4);
    onehot(0, 0) = onehot(1, 2) = onehot(2, 3) = 1.0;
    CHECK(cross_entropy_loss(uniform, onehot) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    Matrix confident = Matrix::Zero(1, 3);
    confident(0, 1) = 1000.0;
    Matrix y1 = Matrix::Zero(1, 3);
    y1(0, 1) = 1.0;
    CHECK(cross_entropy_loss(confident, y1) < 1e-10);

    Matrix two(1, 2);
    two << 1.0, 0.0;
    Matrix y0 = Matrix::Zero(1, 2);
    y0(0, 0) = 1.0;
    CHECK(cross_entropy_loss(two, y0) ==
          doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("cross entropy rejects multi-hot rows") {
    Matrix z = Matrix::Zero(1, 2);
    CHECK_THROWS_AS(cross_entropy_loss(z, Matrix::Ones(1, 2)), ValidationError);
    CHECK_THROWS_AS(cross_entropy_loss(z, Matrix::Zero(1, 2)), ValidationError);
}

TEST_CASE("losses reject non-binary labels and shape mismatches") {
    Matrix z = Matrix::Zero(2, 2);
    Matrix bad = Matrix::Constant(2, 2, 0.5);
    CHECK_THROWS_AS(bce_loss(z, bad), ValidationError);
    CHECK_THROWS_AS(softmargin_loss(z, bad), ValidationError);
    CHECK_THROWS_AS(bce_loss(z, Matrix::Ones(3, 2)), ValidationError);
}

TEST_CASE("classwise coefficients") {
    Matrix y = Matrix::Zero(10, 3);
    y.block(0, 0, 10, 1).setOnes();
    y.block(0, 1, 5, 1).setOnes();
    y.block(0, 2, 2, 1).setOnes();
    Vector alpha = classwise_coefficients(y);
    CHECK(alpha(0) == 1.0);
    CHECK(alpha(1) == 0.5);
    CHECK(alpha(2) == doctest::Approx(0.2).epsilon(1e-15));

    CHECK(classwise_coefficients(Matrix::Ones(4, 1))(0) == 1.0);
    CHECK(classwise_coefficients(Matrix::Ones(4, 3)).isApprox(Vector::Ones(3), 0.0));
}

TEST_CASE("classwise coefficient max is 1 for non-empty labels") {
    auto gen = rng::engine(21);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix y = random_binary(8, 4, gen);
        y(0, 0) = 1.0;
        CHECK(classwise_coefficients(y).maxCoeff() == 1.0);
    }
}

TEST_CASE("positive class weights") {
    Matrix balanced = Matrix::Zero(10, 1);
    balanced.topRows(5).setOnes();
    CHECK(positive_class_weights(balanced)(0) == 1.0);

    Matrix skewed = Matrix::Zero(100, 1);
    skewed.topRows(10).setOnes();
    CHECK(positive_class_weights(skewed)(0) == doctest::Approx(9.0).epsilon(1e-15));

    CHECK(positive_class_weights(Matrix::Zero(50, 1))(0) == 10.0);
    CHECK(positive_class_weights(Matrix::Ones(50, 1))(0) == 0.1);
}

TEST_CASE("loss gradients pass finite-difference checks") {
    auto gen = rng::engine(12);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix z0 = random_matrix(3, 4, gen, -2.0, 2.0);
        Matrix y = random_binary(3, 4, gen);
        Matrix onehot = Matrix::Zero(3, 4);
        for (int i = 0; i < 3; ++i) {
            std::uniform_int_distribution<int> pick(0, 3);
            onehot(i, pick(gen)) = 1.0;
        }
        Vector w = random_matrix(1, 4, gen, 0.5, 3.0).row(0);

        struct Case {
            const char* name;
            std::function<double(const Matrix&)> value;
            std::function<DiffTensor(Tape&, DiffTensor)> node;
        };
        std::vector<Case> cases = {
            {"bce", [&](const Matrix& z) { return bce_loss(z, y); },
             [&](Tape& t, DiffTensor z) { return bce_loss_node(t, z, y); }},
            {"bce_weighted", [&](const Matrix& z) { return bce_loss(z, y, w); },
             [&](Tape& t, DiffTensor z) { return bce_loss_node(t, z, y, w); }},
            {"softmargin", [&](const Matrix& z) { return softmargin_loss(z, y); },
             [&](Tape& t, DiffTensor z) { return softmargin_loss_node(t, z, y); }},
            {"ce", [&](const Matrix& z) { return cross_entropy_loss(z, onehot); },
             [&](Tape& t, DiffTensor z) { return cross_entropy_loss_node(t, z, onehot); }},
        };
        for (const auto& c : cases) {
            CAPTURE(c.name);
            Tape tape;
            DiffTensor z = tape.leaf(z0, true);
            tape.backward(c.node(tape, z));
            Matrix fd = finite_difference_gradient(c.value, z0, 1e-5);
            CHECK(relative_error(z.grad(), fd) < 1e-6);
        }
    }
}
