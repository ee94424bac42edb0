#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "gen.hpp"
#include "odam/embednet.hpp"

using namespace odam;

namespace {

NetConfig small_config() {
    NetConfig c;
    c.input_dim = 2;
    c.layer_dims = {8, 8, 4};
    c.adapt_layer_count = 3;
    return c;
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "odam_test_embednet";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("init_params is deterministic with zero biases") {
    const auto a = init_params(small_config(), 7);
    const auto b = init_params(small_config(), 7);
    CHECK(a == b);
    CHECK_FALSE(a == init_params(small_config(), 8));
    for (const Layer& l : a.layers)
        for (double x : l.bias.data()) CHECK(x == 0.0);
    REQUIRE(a.layers.size() == 3);
    CHECK(a.layers[0].weight.rows() == 2);
    CHECK(a.layers[0].weight.cols() == 8);
    CHECK(a.layers[2].weight.rows() == 8);
    CHECK(a.layers[2].weight.cols() == 4);
}

TEST_CASE("init_params respects the uniform bound") {
    NetConfig c;
    c.input_dim = 2;
    c.layer_dims = {8};
    c.adapt_layer_count = 1;
    const double bound = std::sqrt(6.0 / 10.0);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto p = init_params(c, seed);
        for (double w : p.layers[0].weight.data()) CHECK(std::abs(w) <= bound);
    }
}

TEST_CASE("NetConfig validation") {
    NetConfig c = small_config();
    c.adapt_layer_count = 4;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config();
    c.layer_dims = {};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config();
    c.layer_dims = {8, 0};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config();
    c.input_dim = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("forward_layers examples") {
    const auto p = init_params(small_config(), 3);
    const auto zero = forward_layers(p, Mat(5, 2));
    REQUIRE(zero.size() == 3);
    for (double x : zero.back().data()) CHECK(x == 0.0);

    const Mat dup{{0.4, -1.3}, {0.4, -1.3}};
    const Mat out = embed(p, dup);
    for (std::size_t c = 0; c < out.cols(); ++c) CHECK(out(0, c) == out(1, c));

    NetParams id;
    id.config.input_dim = 2;
    id.config.layer_dims = {2};
    id.config.adapt_layer_count = 1;
    id.layers.push_back({Mat::identity(2), Mat(1, 2)});
    CHECK(embed(id, Mat{{1, -1}}) == Mat{{1, -1}});

    CHECK_THROWS_AS(forward_layers(p, Mat(2, 3)), std::invalid_argument);
}

TEST_CASE("hidden layers are rectified, the last is not") {
    gen::Rng rng(5);
    const auto p = init_params(small_config(), 11);
    const auto layers = forward_layers(p, gen::mat(rng, 30, 2, -4, 4));
    for (std::size_t l = 0; l + 1 < layers.size(); ++l)
        for (double x : layers[l].data()) CHECK(x >= 0.0);
    const auto& last = layers.back().data();
    CHECK(std::any_of(last.begin(), last.end(), [](double x) { return x < 0.0; }));
}

TEST_CASE("property: forward is row-permutation equivariant") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        gen::Rng rng(seed);
        const auto p = init_params(small_config(), seed);
        const Mat batch = gen::mat(rng, gen::index(rng, 1, 12), 2, -3, 3);
        std::vector<std::size_t> perm(batch.rows());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto base = forward_layers(p, batch);
        const auto permuted = forward_layers(p, select_rows(batch, perm));
        for (std::size_t l = 0; l < base.size(); ++l) CHECK(permuted[l] == select_rows(base[l], perm));
        CHECK(embed(p, batch) == base.back());
    }
}

TEST_CASE("property: graph forward matches plain forward and passes grad_check") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        gen::Rng rng(seed);
        NetConfig c = small_config();
        c.layer_dims = {5, 4, 3};
        const auto p = init_params(c, seed);
        const Mat batch = gen::mat(rng, 4, 2, -2, 2);

        Graph g;
        const NetVars vars = bind_params(g, p);
        const auto outs = forward_layers(g, vars, g.input(batch));
        const auto plain = forward_layers(p, batch);
        for (std::size_t l = 0; l < outs.size(); ++l) CHECK(g.value(outs[l]) == plain[l]);

        const Var w = g.input(gen::mat(rng, 4, 3));
        g.set_output(g.sum(g.square(g.mul(outs.back(), w))));
        const auto report = grad_check(g, 1e-4, 1e-4);
        INFO("seed " << seed << " max rel error " << report.max_rel_error);
        CHECK(report.pass);
        g.forward();
        g.backward();
        CHECK(param_grads(g, vars).size() == 2 * c.layer_dims.size());
    }
}

TEST_CASE("checkpoint round trip") {
    const auto p = init_params(small_config(), 21);
    const auto path = scratch("ckpt");
    write_checkpoint(p, {21, 17}, path);
    CheckpointMeta meta;
    const auto q = read_checkpoint(path, &meta);
    CHECK(q == p);
    CHECK(meta.seed == 21);
    CHECK(meta.epoch == 17);

    std::ifstream is(path);
    std::string first;
    std::getline(is, first);
    CHECK(first == "odam-ckpt-v1");
}

TEST_CASE("checkpoint errors carry line numbers") {
    const auto path = scratch("bad_ckpt");
    {
        std::ofstream os(path);
        os << "odam-ckpt-v1\ninput_dim 2\nlayers 1 2\nadapt 1\nseed 1\nepoch 0\nweight 2 2\n1 2\n3\n";
    }
    try {
        read_checkpoint(path);
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find(":9:") != std::string::npos);
    }
    CHECK_THROWS(read_checkpoint(scratch("missing_ckpt")));
}
