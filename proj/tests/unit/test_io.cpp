#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "helpers.hpp"
#include "quap/error.hpp"
#include "quap/io.hpp"

using namespace quap;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

std::filesystem::path scratch(const std::string& name) {
    return std::filesystem::temp_directory_path() / "quap_test_io" / name;
}

}  // namespace

TEST_CASE("model file round-trips bit for bit") {
    auto m = classifier::make_classifier(3, 4, 5);
    classifier::randomize_params(m, 77);
    m.params[0] = 0.1;
    m.params[1] = std::nextafter(1.0, 2.0);
    m.params[2] = 5e-324;
    const auto path = scratch("model.json");
    io::write_json(path, io::model_to_json(m));
    const auto back = io::model_from_json(io::read_json(path));
    CHECK(back.D == 3);
    CHECK(back.K == 2);
    CHECK(back.k == 4);
    CHECK(back.spec.layers == 5);
    CHECK(back.spec.entangler == m.spec.entangler);
    REQUIRE(back.params.size() == m.params.size());
    for (std::size_t i = 0; i < m.params.size(); ++i) CHECK(same_bits(back.params[i], m.params[i]));
}

TEST_CASE("model file errors") {
    auto j = io::model_to_json(classifier::make_classifier(2, 2, 1));
    j.erase("params");
    CHECK_THROWS_AS(io::model_from_json(j), FormatError);
    j = io::model_to_json(classifier::make_classifier(2, 2, 1));
    j["version"] = 99;
    CHECK_THROWS_AS(io::model_from_json(j), FormatError);
    j = io::model_to_json(classifier::make_classifier(2, 2, 1));
    j["params"].push_back(1.0);
    CHECK_THROWS_AS(io::model_from_json(j), ShapeError);
    CHECK_THROWS_AS(io::read_json(scratch("does_not_exist.json")), IoError);
    io::write_text(scratch("bad.json"), "{not json");
    CHECK_THROWS_AS(io::read_json(scratch("bad.json")), FormatError);
}

TEST_CASE("generator and attack files round-trip") {
    const auto g = additive::make_generator({4, 6, 3}, 0.01, 5);
    const auto g2 = io::generator_from_json(io::read_json([&] {
        io::write_json(scratch("gen.json"), io::generator_to_json(g));
        return scratch("gen.json");
    }()));
    CHECK(g2.sizes == g.sizes);
    CHECK(g2.weights == g.weights);
    CHECK(g2.biases == g.biases);

    Rng rng(2, "u");
    unitary::UnitaryAttack m;
    m.matrix = testutil::random_unitary(4, rng);
    m.alpha = 0.3;
    const auto mj = nlohmann::json::parse(io::attack_to_json(m).dump());
    const auto m2 = io::attack_from_json(mj);
    CHECK(m2.form == unitary::UnitaryAttack::Form::Matrix);
    CHECK(linalg::max_abs_diff(m2.matrix, m.matrix) == 0.0);
    CHECK(mj["entries"].size() == 32);
    CHECK(mj["entries"][1].get<double>() == m.matrix(0, 0).imag());

    std::vector<double> p(qsim::CircuitSpec{2, 3, qsim::Entangler::CZ}.param_count(), 0.25);
    const auto c = unitary::UnitaryAttack::circuit({2, 3, qsim::Entangler::CZ}, p);
    const auto cj = io::attack_to_json(c);
    CHECK(cj["D"] == 2);
    CHECK(cj["K"] == 0);
    const auto c2 = io::attack_from_json(nlohmann::json::parse(cj.dump()));
    CHECK(c2.params == c.params);
    CHECK(c2.spec.entangler == qsim::Entangler::CZ);

    auto bad = mj;
    bad["entries"].push_back(0.0);
    CHECK_THROWS_AS(io::attack_from_json(bad), FormatError);
}

TEST_CASE("quantum dataset round-trips") {
    data::TimConfig cfg;
    cfg.train_count = 6;
    cfg.test_count = 2;
    const auto split = data::synthesize_tim(cfg);
    const auto j = nlohmann::json::parse(io::dataset_to_json(split.train).dump());
    const auto back = io::dataset_from_json(j);
    CHECK(back.labels == split.train.labels);
    CHECK(back.metadata == split.train.metadata);
    for (std::size_t i = 0; i < back.size(); ++i) {
        for (std::size_t a = 0; a < back.dim(); ++a) {
            CHECK(same_bits(back.states[i][a].real(), split.train.states[i][a].real()));
            CHECK(same_bits(back.states[i][a].imag(), split.train.states[i][a].imag()));
        }
    }
}

TEST_CASE("csv quoting and doubles") {
    io::CsvWriter w({"a", "b"});
    w.row({"x,y", "say \"hi\""});
    w.row({"1", io::fmt(0.1)});
    CHECK(w.str() == "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n1,0.1\n");
    CHECK(w.rows() == 2);
    CHECK_THROWS_AS(w.row({"1"}), ShapeError);
    CHECK(std::stod(io::fmt(1.0 / 3.0)) == 1.0 / 3.0);
}
