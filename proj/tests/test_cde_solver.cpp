#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>

#include "nrde/cde_solver.hpp"
#include "test_util.hpp"

using namespace nrde;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
    return e;
}

LinearVectorField random_field(std::mt19937_64& rng, std::size_t n, std::size_t d, double scale, bool offsets = true) {
    std::normal_distribution<double> g(0.0, scale);
    LinearVectorField f = LinearVectorField::zeros(n, d);
    for (auto& m : f.a)
        for (double& x : m.data) x = g(rng);
    if (offsets)
        for (auto& b : f.b)
            for (double& x : b) x = g(rng);
    return f;
}

double dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

TEST(Rk4, Examples) {
    const Vec z0{1.5, -2.0};
    EXPECT_EQ(rk4_solve([](const Vec& z, double) { return Vec(z.size(), 0.0); }, z0, 0.0, 1.0, 3), z0);
    const Vec one = rk4_solve([](const Vec& z, double) { return z; }, Vec{1.0}, 0.0, 1.0, 1);
    EXPECT_NEAR(one[0], 1.0 + 1.0 + 0.5 + 1.0 / 6.0 + 1.0 / 24.0, 1e-15);
    double prev = 0.0;
    for (std::size_t n : {4, 8, 16, 32}) {
        const double err = std::abs(rk4_solve([](const Vec& z, double) { return z; }, Vec{1.0}, 0.0, 1.0, n)[0] - std::exp(1.0));
        if (prev > 0.0) {
            EXPECT_NEAR(std::log2(prev / err), 4.0, 0.2);
        }
        prev = err;
    }
}

TEST(Rk4, OverflowNamesStep) {
    try {
        rk4_solve([](const Vec& z, double) { return Vec{z[0] * z[0] * 1e200}; }, Vec{1e100}, 0.0, 1.0, 5);
        FAIL() << "expected overflow";
    } catch (const OverflowError& e) {
        EXPECT_EQ(e.index(), 0u);
    }
    EXPECT_THROW(rk4_solve([](const Vec& z, double) { return z; }, Vec{1.0}, 0.0, 1.0, 0), DomainError);
}

TEST(VfDerivative, Examples) {
    std::mt19937_64 rng(31);
    const LinearVectorField f1 = random_field(rng, 3, 1, 0.7, false);
    const Vec y{0.2, -1.0, 0.5};
    EXPECT_EQ(vf_derivative(f1, 0, y), y);
    Vec ak = y;
    for (int k = 1; k <= 4; ++k) {
        ak = matvec(f1.a[0], ak);
        const Vec got = vf_derivative(f1, k, y);
        EXPECT_LT(dist(got, ak), 1e-13);
    }
    const LinearVectorField f2 = random_field(rng, 3, 2, 0.7, false);
    const Vec w12 = vf_derivative(f2, 2, y);
    const Vec expect = matvec(f2.a[1], matvec(f2.a[0], y));
    const Vec col(w12.begin() + 3, w12.begin() + 6);  // word (1,2) at flat index 1
    EXPECT_LT(dist(col, expect), 1e-13);
    EXPECT_THROW(vf_derivative(f2, 17, y), DomainError);
}

TEST(VfDerivative, FiniteDifferencesMatchAffineClosedForm) {
    std::mt19937_64 rng(32);
    const LinearVectorField lin = random_field(rng, 2, 2, 0.8);
    SmoothVectorField sm{2, 2, [lin](std::span<const double> y) { return lin(y); }, 3};
    const Vec y{0.3, -0.4};
    for (int k = 1; k <= 3; ++k) EXPECT_LT(dist(vf_derivative(sm, k, y), vf_derivative(lin, k, y)), 1e-6) << k;
    EXPECT_THROW(vf_derivative(sm, 4, y), DomainError);
}

TEST(VfDerivative, NonlinearSecondDerivative) {
    // f_0(y) = sin(y), f_1(y) = y^2 in one dimension: f∘2[(0,1)] = f_1'(y) f_0(y) = 2y sin(y).
    SmoothVectorField f{1, 2, [](std::span<const double> y) { return Vec{std::sin(y[0]), y[0] * y[0]}; }, 3};
    const double y = 0.7;
    const Vec d2 = vf_derivative(f, 2, Vec{y});
    EXPECT_NEAR(d2[1], 2.0 * y * std::sin(y), 1e-7);
    EXPECT_NEAR(d2[2], std::cos(y) * y * y, 1e-7);
}

TEST(TaylorStep, Examples) {
    std::mt19937_64 rng(33);
    const LinearVectorField f = random_field(rng, 2, 2, 0.5);
    const Vec y{1.0, 2.0};
    EXPECT_EQ(taylor_step(f, y, TruncatedTensor::unit(TensorShape(2, 3))), y);
    const std::vector<double> inc{0.3, -0.2};
    const Vec e = taylor_step(f, y, segment_signature(inc, 1));
    const Vec fy = f(y);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(e[i], y[i] + fy[i] * inc[0] + fy[2 + i] * inc[1], 1e-15);
    EXPECT_THROW(taylor_step(f, y, TruncatedTensor(TensorShape(2, 2))), DomainError);
    EXPECT_THROW(taylor_step(f, y, TruncatedTensor::unit(TensorShape(3, 2))), ShapeError);
}

TEST(TaylorStep, MatrixExponentialOrder) {
    std::mt19937_64 rng(34);
    const LinearVectorField f = random_field(rng, 3, 1, 0.8, false);
    const Vec y{1.0, -0.5, 0.25};
    const Eigen::MatrixXd a = to_eigen(f.a[0]);
    const Eigen::Vector3d ye(y[0], y[1], y[2]);
    for (int n = 1; n <= 3; ++n) {
        double prev = 0.0;
        for (double h : {0.2, 0.1, 0.05}) {
            const Eigen::VectorXd exact = (a * h).exp() * ye;
            const Vec t = taylor_step(f, y, segment_signature(std::vector<double>{h}, n));
            const double err = std::sqrt((exact - Eigen::Vector3d(t[0], t[1], t[2])).squaredNorm());
            if (prev > 0.0) {
                EXPECT_NEAR(std::log2(prev / err), n + 1, 0.3) << n;
            }
            prev = err;
        }
    }
}

TEST(LogOdeField, Examples) {
    std::mt19937_64 rng(35);
    const LinearVectorField f = random_field(rng, 2, 2, 0.5);
    const Vec z{0.4, 0.1};
    const std::vector<double> inc{0.3, 0.7};
    const Vec got = logode_field(f, TruncatedTensor::from_level1(TensorShape(2, 1), inc))(z);
    const Vec fz = f(z);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(got[i], fz[i] * inc[0] + fz[2 + i] * inc[1], 1e-15);

    const TruncatedTensor zero(TensorShape(2, 3));
    EXPECT_EQ(logode_field(f, zero)(z), Vec(2, 0.0));
    EXPECT_EQ(logode_step(f, z, zero), z);

    const LinearVectorField g = random_field(rng, 2, 1, 0.5, false);
    const Vec gz = logode_field(g, TruncatedTensor::from_level1(TensorShape(1, 2), std::vector<double>{0.6}))(z);
    const Vec az = matvec(g.a[0], z);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(gz[i], 0.6 * az[i], 1e-15);

    const LyndonBasis wrong(2, 3);
    LogSignature ls{2, 2, 0.0, 1.0, {0.1, 0.2, 0.3}};
    EXPECT_THROW(logode_field(f, ls, wrong), DomainError);
}

TEST(LogOdeField, AffineClosedFormMatchesGenericContraction) {
    std::mt19937_64 rng(36);
    const LinearVectorField f = random_field(rng, 3, 2, 0.6);
    SmoothVectorField sm{3, 2, [f](std::span<const double> y) { return f(y); }, 3};
    const PiecewiseLinearPath p = test::random_path(rng, 5, 1, 0.5);
    const TruncatedTensor l = tensor_log(path_signature(p, 3));
    const Vec z{0.1, 0.2, -0.3};
    EXPECT_LT(dist(logode_field(f, l)(z), logode_field(sm, l)(z)), 1e-6);
    EXPECT_LT(dist(logode_field(f, l)(z), detail::contract(f, z, l)), 1e-12);
}

TEST(LogOdeStep, Examples) {
    std::mt19937_64 rng(37);
    const LinearVectorField f = random_field(rng, 2, 2, 0.7);
    const PiecewiseLinearPath chord({0.0, 0.8}, {0.0, 0.5}, 1);
    const Vec y0{0.5, -0.5};
    // Depth 1 over one interval equals driving the CDE by the chord.
    const Vec a = logode_step(f, y0, tensor_log(path_signature(chord, 1)), OdeSolveConfig{256});
    const Vec ref = linear_cde_reference(f, y0, chord, 1024, 2);
    EXPECT_LT(dist(a, ref), 1e-12);

    // Commuting case: channel 1 field zero -> exp(A_0 dX^0) y.
    LinearVectorField c = random_field(rng, 2, 2, 0.7, false);
    c.a[1] = Matrix(2, 2);
    const PiecewiseLinearPath p = test::random_path(rng, 6, 1);
    const Vec got = logode_step(c, y0, tensor_log(path_signature(p, 3)), OdeSolveConfig{2048});
    const Eigen::VectorXd exact = (to_eigen(c.a[0]) * (p.end() - p.start())).exp() * Eigen::Vector2d(y0[0], y0[1]);
    EXPECT_LT(std::hypot(got[0] - exact(0), got[1] - exact(1)), 1e-9 * exact.norm());
}

TEST(LogOdeSolve, ConstantPathAndWongZakai) {
    std::mt19937_64 rng(38);
    const LinearVectorField f = random_field(rng, 2, 2, 0.7, false);
    const PiecewiseLinearPath flat({0.0, 1.0, 2.0}, {3.0, 3.0, 3.0}, 1);
    LinearVectorField g = f;
    g.a[0] = Matrix(2, 2);  // no time dependence either
    const Vec y0{0.3, 0.9};
    for (const Vec& y : logode_solve(g, y0, flat, flat.times(), 2)) EXPECT_EQ(y, y0);

    const PiecewiseLinearPath p = test::random_path(rng, 9, 1, 0.4);
    const Vec sol = logode_solve(f, y0, p, p.times(), 1, OdeSolveConfig{1024}).back();
    const Vec ref = linear_cde_reference(f, y0, p, 8, 1024);
    EXPECT_LT(dist(sol, ref), 1e-12 * dist(ref, Vec(2, 0.0)));
}

TEST(LinearCdeReference, MatrixExponentialAndRefinement) {
    std::mt19937_64 rng(39);
    LinearVectorField f = random_field(rng, 3, 2, 0.7, false);
    f.a[0] = Matrix(3, 3);
    const PiecewiseLinearPath p = test::random_path(rng, 7, 1);
    const Vec y0{1.0, 0.0, -1.0};
    const Vec ref = linear_cde_reference(f, y0, p);
    const double dx = p.row(p.num_points() - 1)[0] - p.row(0)[0];
    const Eigen::VectorXd exact = (to_eigen(f.a[1]) * dx).exp() * Eigen::Vector3d(y0[0], y0[1], y0[2]);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(ref[static_cast<std::size_t>(i)], exact(i), 1e-8);

    const LinearVectorField g = random_field(rng, 2, 2, 0.8);
    const PiecewiseLinearPath q = test::random_path(rng, 12, 1);
    const Vec r1 = linear_cde_reference(g, Vec{1.0, 1.0}, q, 1 << 12);
    const Vec r2 = linear_cde_reference(g, Vec{1.0, 1.0}, q, 1 << 13);
    EXPECT_LT(dist(r1, r2), 1e-8 * (1.0 + std::sqrt(r2[0] * r2[0] + r2[1] * r2[1])));

    const PiecewiseLinearPath zero({0.0, 1.0}, {0.0, 0.0}, 1);
    LinearVectorField h = random_field(rng, 2, 2, 0.8, false);
    h.a[0] = Matrix(2, 2);
    EXPECT_EQ(linear_cde_reference(h, Vec{0.5, 0.25}, zero, 64), (Vec{0.5, 0.25}));
}

TEST(LogOdeSolve, DepthTwoBeatsDepthOneOnCurvedDriver) {
    std::mt19937_64 rng(40);
    const LinearVectorField f = random_field(rng, 2, 3, 0.8);
    const std::size_t n = 256;
    std::vector<double> t(n + 1), v(2 * (n + 1));
    for (std::size_t i = 0; i <= n; ++i) {
        t[i] = static_cast<double>(i) / n;
        v[2 * i] = std::sin(4.0 * t[i]);
        v[2 * i + 1] = std::cos(3.0 * t[i]);
    }
    const PiecewiseLinearPath p(t, v, 2);
    const Vec y0{1.0, -1.0};
    const Vec ref = linear_cde_reference(f, y0, p);
    for (std::size_t step : {32u, 64u}) {
        const std::vector<double> part = index_partition(p, step);
        const double e1 = dist(logode_solve(f, y0, p, part, 1, OdeSolveConfig{16}).back(), ref);
        const double e2 = dist(logode_solve(f, y0, p, part, 2, OdeSolveConfig{16}).back(), ref);
        EXPECT_LT(e2, e1);
    }
}

TEST(LogOdeSolve, AffineBoundednessWithL1LevelNorms) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const LinearVectorField f = random_field(rng, 3, 2, 0.6, false);
        double k = 0.0;
        for (const Matrix& a : f.a) k = std::max(k, to_eigen(a).operatorNorm());
        const PiecewiseLinearPath p = test::random_path(rng, 4, 1);
        const TruncatedTensor l = tensor_log(path_signature(p, 3));
        double expo = 0.0, km = 1.0;
        for (int m = 1; m <= 3; ++m) {
            km *= k;
            double l1 = 0.0;
            for (double c : l.level(m)) l1 += std::abs(c);
            expo += km * l1;
        }
        const Vec y0{0.4, -0.8, 0.3};
        const Vec z = logode_step(f, y0, l, OdeSolveConfig{32});
        EXPECT_LE(dist(z, Vec(3, 0.0)), dist(y0, Vec(3, 0.0)) * std::exp(expo) * (1.0 + 1e-12));
    }
}

TEST(TaylorStep, AgreesWithLogOdeForConstantField) {
    LinearVectorField f = LinearVectorField::zeros(2, 2);
    f.b[0] = {0.5, -1.0};
    f.b[1] = {2.0, 0.25};
    const std::vector<double> inc{0.7, -0.3};
    const Vec y{1.0, 1.0};
    const Vec a = taylor_step(f, y, segment_signature(inc, 1));
    const Vec b = logode_step(f, y, TruncatedTensor::from_level1(TensorShape(2, 1), inc), OdeSolveConfig{1});
    EXPECT_LT(dist(a, b), 1e-15);
}
