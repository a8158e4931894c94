#include <doctest.h>

#include "alm/barycenter.hpp"
#include "alm/errors.hpp"
#include "oracles.hpp"

#include <string>

using namespace alm;

namespace {

GaussianModel scalar(double m, double var) { return GaussianModel(Vector::Constant(1, m), Matrix::Constant(1, 1, var)); }

Vector weights(std::initializer_list<double> w) {
    Vector v(static_cast<Eigen::Index>(w.size()));
    Eigen::Index i = 0;
    for (double x : w) v(i++) = x;
    return v;
}

}  // namespace

TEST_CASE("prior set validation") {
    std::vector<GaussianModel> two{scalar(0, 1), scalar(1, 2)};
    try {
        PriorSet(two, weights({0.5, 0.6}));
        FAIL("expected a simplex violation");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("simplex") != std::string::npos);
    }
    CHECK_THROWS_AS(PriorSet(two, weights({1.5, -0.5})), ValidationError);
    CHECK_THROWS_AS(PriorSet(two, weights({1.0})), ValidationError);
    CHECK_THROWS_AS(PriorSet({}, Vector()), ValidationError);
    std::vector<GaussianModel> mixed{scalar(0, 1), GaussianModel(Vector::Zero(2), Matrix::Identity(2, 2))};
    CHECK_THROWS_AS(PriorSet(mixed, weights({0.5, 0.5})), ValidationError);

    const PriorSet eq = PriorSet::equal_weights(std::vector<GaussianModel>(3, scalar(0, 1)));
    CHECK(eq.weights().sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(eq.size() == 3);
}

TEST_CASE("scalar barycenter") {
    const auto r = barycenter(PriorSet::equal_weights({scalar(0, 1), scalar(2, 9)}));
    CHECK(r.converged);
    CHECK(r.model.mean()(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.model.cov()(0, 0) == doctest::Approx(4.0).epsilon(1e-12));

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<GaussianModel> models;
        Vector w(5);
        double mean = 0.0;
        double sd = 0.0;
        for (int i = 0; i < 5; ++i) w(i) = u(rng);
        w /= w.sum();
        for (int i = 0; i < 5; ++i) {
            const double m = u(rng) - 1.5;
            const double s = u(rng);
            models.push_back(scalar(m, s * s));
            mean += w(i) * m;
            sd += w(i) * s;
        }
        const auto b = barycenter(PriorSet(models, w));
        CHECK(std::abs(b.model.mean()(0) - mean) < 1e-10);
        CHECK(std::abs(b.model.cov()(0, 0) - sd * sd) < 1e-10);
    }
}

TEST_CASE("commuting covariances") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.05, 4.0);
    for (int dim : {2, 4, 6}) {
        const Matrix q = oracle::random_rotation(dim, rng);
        std::vector<GaussianModel> models;
        Matrix root_sum = Matrix::Zero(dim, dim);
        const Vector w = Vector::Constant(3, 1.0 / 3.0);
        for (int i = 0; i < 3; ++i) {
            Vector d(dim);
            for (int k = 0; k < dim; ++k) d(k) = u(rng);
            const Matrix c = oracle::sqrtm(q * d.asDiagonal() * q.transpose());
            models.emplace_back(Vector::Zero(dim), c * c);
            root_sum += w(i) * q * d.cwiseSqrt().asDiagonal() * q.transpose();
        }
        const auto b = barycenter(PriorSet(models, w));
        const Matrix expected = root_sum * root_sum;
        CHECK((b.model.cov() - expected).norm() / expected.norm() < 1e-8);
    }
}

TEST_CASE("general barycenter satisfies the fixed-point equation and is minimal") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> z;
    std::vector<GaussianModel> models;
    for (int i = 0; i < 4; ++i) {
        Vector m(3);
        for (int k = 0; k < 3; ++k) m(k) = z(rng);
        models.emplace_back(m, oracle::random_spd(3, rng));
    }
    const Vector w = (Vector(4) << 0.1, 0.2, 0.3, 0.4).finished();
    const PriorSet priors(models, w);
    const auto b = barycenter(priors);
    REQUIRE(b.converged);

    const Matrix c = b.model.cov();
    const Matrix s = oracle::sqrtm(c);
    Matrix rhs = Matrix::Zero(3, 3);
    for (int i = 0; i < 4; ++i) rhs += w(i) * oracle::sqrtm(s * models[i].cov() * s);
    CHECK((rhs - c).norm() / c.norm() < 1e-9);
    CHECK(b.frechet_variance == doctest::Approx(frechet_variance(b.model, priors)));

    for (int trial = 0; trial < 20; ++trial) {
        Vector dm(3);
        for (int k = 0; k < 3; ++k) dm(k) = 0.05 * z(rng);
        Matrix e = 0.05 * oracle::random_spd(3, rng, 0.0);
        const GaussianModel other(b.model.mean() + dm, c + e);
        CHECK(frechet_variance(other, priors) >= b.frechet_variance - 1e-12);
    }
}

TEST_CASE("idempotence and vertex weights") {
    std::mt19937_64 rng(8);
    const GaussianModel m(Vector::Ones(3), oracle::random_spd(3, rng));
    const auto same = barycenter(PriorSet::equal_weights({m, m, m, m}));
    CHECK((same.model.cov() - m.cov()).norm() < 1e-12 * m.cov().norm());
    CHECK((same.model.mean() - m.mean()).norm() < 1e-14);
    CHECK(same.frechet_variance < 1e-12);

    const GaussianModel other(Vector::Zero(3), oracle::random_spd(3, rng));
    const auto vertex = barycenter(PriorSet({other, m}, weights({0.0, 1.0})));
    CHECK((vertex.model.cov() - m.cov()).norm() < 1e-9 * m.cov().norm());
    CHECK((vertex.model.mean() - m.mean()).norm() < 1e-14);
}

TEST_CASE("degenerate priors") {
    const GaussianModel dirac0(Vector::Zero(2), Matrix::Zero(2, 2));
    const GaussianModel dirac1(Vector::Ones(2), Matrix::Zero(2, 2));
    const auto b = barycenter(PriorSet::equal_weights({dirac0, dirac1}));
    CHECK(b.converged);
    CHECK(b.model.cov().norm() == 0.0);
    CHECK(b.model.mean()(0) == doctest::Approx(0.5));
    CHECK(b.frechet_variance == doctest::Approx(0.5));
}

TEST_CASE("iteration cap returns the last iterate") {
    std::mt19937_64 rng(10);
    std::vector<GaussianModel> models;
    for (int i = 0; i < 3; ++i) models.emplace_back(Vector::Zero(4), oracle::random_spd(4, rng, 0.01));
    const PriorSet priors = PriorSet::equal_weights(models);
    const auto capped = barycenter(priors, {1e-300, 1});
    CHECK_FALSE(capped.converged);
    CHECK(capped.iterations == 1);
    CHECK(capped.last_change > 0.0);
    const auto full = barycenter(priors);
    CHECK(full.converged);
    CHECK(full.frechet_variance <= capped.frechet_variance + 1e-12);
}
