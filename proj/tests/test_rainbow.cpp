#include "mtc/errors.hpp"
#include "mtc/rainbow/adam.hpp"
#include "mtc/rainbow/categorical.hpp"
#include "mtc/rainbow/checkpoint.hpp"
#include "mtc/rainbow/learner.hpp"
#include "mtc/rainbow/network.hpp"
#include "mtc/rainbow/replay.hpp"
#include "mtc/rainbow/trainer.hpp"
#include "toy_mdp.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

using namespace mtc;
using namespace mtc::rainbow;

namespace {

// Hat-function form of the projection: target atom j collects
// p_i * max(0, 1 - |clip(Tz_i) - z_j| / delta).
std::vector<double> projection_oracle(const std::vector<double>& p, double r, bool done, double gamma,
                                      const Support& s) {
    std::vector<double> m(s.atoms, 0.0);
    for (std::size_t i = 0; i < s.atoms; ++i) {
        const double tz = std::clamp(r + (done ? 0.0 : gamma) * s.atom(i), s.v_min, s.v_max);
        for (std::size_t j = 0; j < s.atoms; ++j) {
            m[j] += p[i] * std::max(0.0, 1.0 - std::abs(tz - s.atom(j)) / s.delta());
        }
    }
    return m;
}

std::vector<double> random_distribution(std::size_t n, std::mt19937_64& rng) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> p(n);
    for (double& x : p) x = e(rng);
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& x : p) x /= sum;
    return p;
}

template <typename T>
void randomize(DuelingNetwork<T>& net, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (T& w : net.parameters()) w = static_cast<T>(u(rng));
}

std::vector<Transition> random_batch(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Transition> out(n);
    for (Transition& t : out) {
        for (std::size_t k = 0; k < dim; ++k) {
            t.observation.push_back(static_cast<float>(u(rng)));
            t.next_observation.push_back(static_cast<float>(u(rng)));
        }
        t.action = rng() % 2 ? Action::Go : Action::Stop;
        t.reward = 3.0 * u(rng);
        t.done = rng() % 4 == 0;
    }
    return out;
}

}  // namespace

TEST_CASE("support and expected value") {
    const Support s;
    CHECK(s.delta() == doctest::Approx(0.8));
    CHECK(s.atom(0) == -20.0);
    CHECK(s.atom(50) == doctest::Approx(20.0));
    std::vector<double> uniform(51, 1.0 / 51.0);
    CHECK(std::abs(expected_value(uniform, s)) < 1e-12);
    std::vector<double> point(51, 0.0);
    point[30] = 1.0;
    CHECK(expected_value(point, s) == doctest::Approx(4.0));
    CHECK_THROWS_AS((Support{1.0, 1.0, 51}).validate(), ConfigError);
    CHECK_THROWS_AS((Support{-1.0, 1.0, 1}).validate(), ConfigError);
}

TEST_CASE("categorical projection") {
    const Support s;
    SUBCASE("hand cases") {
        std::vector<double> point(51, 0.0);
        point[25] = 1.0;  // z = 0
        auto m = categorical_projection(point, 0.4, true, 0.99, s);  // half way between atoms 25 and 26
        CHECK(m[25] == doctest::Approx(0.5));
        CHECK(m[26] == doctest::Approx(0.5));
        m = categorical_projection(point, 100.0, false, 0.99, s);
        CHECK(m[50] == doctest::Approx(1.0));
        m = categorical_projection(point, -100.0, false, 0.99, s);
        CHECK(m[0] == doctest::Approx(1.0));
        point.assign(51, 0.0);
        point[50] = 1.0;
        m = categorical_projection(point, 0.0, false, 1.0, s);
        CHECK(m[50] == doctest::Approx(1.0));
    }
    SUBCASE("matches the oracle") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> r(-25.0, 25.0);
        std::uniform_real_distribution<double> g(0.0, 1.0);
        for (int k = 0; k < 200; ++k) {
            const auto p = random_distribution(s.atoms, rng);
            const double reward = r(rng);
            const double gamma = g(rng);
            const bool done = k % 5 == 0;
            const auto m = categorical_projection(p, reward, done, gamma, s);
            const auto o = projection_oracle(p, reward, done, gamma, s);
            double sum = 0.0;
            for (std::size_t j = 0; j < s.atoms; ++j) {
                CHECK(std::abs(m[j] - o[j]) < 1e-9);
                CHECK(m[j] >= 0.0);
                sum += m[j];
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
    SUBCASE("odd supports") {
        const Support small{-1.0, 3.0, 5};
        std::mt19937_64 rng(2);
        for (int k = 0; k < 50; ++k) {
            const auto p = random_distribution(small.atoms, rng);
            const auto m = categorical_projection(p, 0.37 * k - 5.0, false, 0.9, small);
            const auto o = projection_oracle(p, 0.37 * k - 5.0, false, 0.9, small);
            for (std::size_t j = 0; j < small.atoms; ++j) CHECK(std::abs(m[j] - o[j]) < 1e-12);
        }
    }
}

TEST_CASE("action selection") {
    CHECK(greedy_action(std::vector<double>{1.0, 0.5}) == Action::Go);
    CHECK(greedy_action(std::vector<double>{0.5, 1.0}) == Action::Stop);
    CHECK(greedy_action(std::vector<double>{0.25, 0.25}) == Action::Stop);

    std::mt19937_64 rng(5);
    const std::vector<double> q{2.0, 1.0};
    for (int k = 0; k < 100; ++k) CHECK(epsilon_greedy(q, 0.0, rng) == Action::Go);
    int stops = 0;
    for (int k = 0; k < 20000; ++k) stops += epsilon_greedy(q, 1.0, rng) == Action::Stop;
    CHECK(std::abs(stops / 20000.0 - 0.5) < 0.02);
}

TEST_CASE("network shapes and initial output") {
    const NetShape shape;
    const auto layers = shape.layers();
    REQUIRE(layers.size() == 10);
    CHECK(layers[0].name == "trunk0.weight");
    CHECK(layers[0].rows == 512);
    CHECK(layers[0].cols == 12);
    CHECK(layers[6].name == "value.weight");
    CHECK(layers[6].rows == 51);
    CHECK(layers[8].name == "advantage.weight");
    CHECK(layers[8].rows == 102);
    const std::size_t expected = 512 * 12 + 512 + 2 * (512 * 512 + 512) + 51 * 512 + 51 + 102 * 512 + 102;
    CHECK(shape.parameter_count() == expected);

    DuelingNetwork<float> net(shape);
    net.initialize(3);
    CHECK(net.parameter_count() == expected);
    DuelingNetwork<float>::Matrix x = DuelingNetwork<float>::Matrix::Random(12, 3);
    const auto probs = net.forward(x);
    CHECK(probs.rows() == 102);
    CHECK(probs.cols() == 3);
    for (Eigen::Index c = 0; c < 3; ++c) {
        for (Eigen::Index i = 0; i < 102; ++i) CHECK(probs(i, c) == doctest::Approx(1.0 / 51.0));
        const auto q = q_values<float>(probs, c, Support{});
        CHECK(greedy_action(q) == Action::Stop);
    }
    CHECK_THROWS_AS(net.forward(DuelingNetwork<float>::Matrix::Zero(5, 1)), ContractViolation);

    DuelingNetwork<float> again(shape);
    again.initialize(3);
    CHECK(again.parameters() == net.parameters());
}

TEST_CASE("dueling aggregation is invariant to shared advantage shifts") {
    const NetShape shape{4, {8, 6}, 2, 11};
    DuelingNetwork<double> net(shape);
    randomize(net, 8, 0.5);
    DuelingNetwork<double>::Matrix x = DuelingNetwork<double>::Matrix::Random(4, 5);
    const auto before = net.forward(x);

    // advantage.bias is the last layer: shift every action by the same per-atom vector
    const auto layers = shape.layers();
    std::size_t offset = shape.parameter_count() - layers.back().rows;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<double> shift(11);
    for (double& s : shift) s = u(rng);
    for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t i = 0; i < 11; ++i) net.parameters()[offset + a * 11 + i] += shift[i];
    }
    CHECK((net.forward(x) - before).cwiseAbs().maxCoeff() < 1e-12);

    // a constant on the value bias shifts every logit and cancels in the softmax
    offset -= layers[layers.size() - 2].rows * layers[layers.size() - 2].cols + 11;
    for (std::size_t i = 0; i < 11; ++i) net.parameters()[offset + i] += 4.0;
    CHECK((net.forward(x) - before).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("non-finite activations are reported") {
    DuelingNetwork<float> net(NetShape{2, {3}, 2, 5});
    net.initialize(1);
    DuelingNetwork<float>::Matrix x(2, 1);
    x << std::numeric_limits<float>::infinity(), 0.0f;
    CHECK_THROWS_AS(net.forward(x), NumericalError);
}

TEST_CASE("loss gradient matches finite differences") {
    const Support support{-2.0, 2.0, 7};
    const NetShape shape{3, {6, 5}, 2, 7};
    DuelingNetwork<double> online(shape);
    DuelingNetwork<double> target(shape);
    randomize(online, 11, 0.6);
    randomize(target, 12, 0.6);
    std::mt19937_64 rng(13);
    const auto storage = random_batch(6, 3, rng);
    std::vector<const Transition*> batch;
    for (const Transition& t : storage) batch.push_back(&t);
    const std::vector<double> w{1.0, 0.5, 0.8, 0.3, 1.0, 0.9};

    const auto base = loss_and_gradient(online, target, batch, w, 0.9, support);
    CHECK(base.priorities.size() == 6);
    for (double p : base.priorities) CHECK(p > 0.0);

    double worst = 0.0;
    const double h = 1e-6;
    for (std::size_t k = 0; k < online.parameter_count(); ++k) {
        const double saved = online.parameters()[k];
        online.parameters()[k] = saved + h;
        const double up = loss_and_gradient(online, target, batch, w, 0.9, support).loss;
        online.parameters()[k] = saved - h;
        const double down = loss_and_gradient(online, target, batch, w, 0.9, support).loss;
        online.parameters()[k] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double err = std::abs(fd - base.grad[k]) / std::max(1.0, std::abs(fd) + std::abs(base.grad[k]));
        worst = std::max(worst, err);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("loss is the weighted cross-entropy against double-Q targets") {
    const Support support{-2.0, 2.0, 5};
    const NetShape shape{2, {4}, 2, 5};
    DuelingNetwork<double> online(shape);
    DuelingNetwork<double> target(shape);
    randomize(online, 21, 0.8);
    randomize(target, 22, 0.8);
    Transition t;
    t.observation = {0.3f, -0.2f};
    t.next_observation = {-0.5f, 0.9f};
    t.action = Action::Go;
    t.reward = 0.7;
    const std::vector<const Transition*> batch{&t};

    DuelingNetwork<double>::Matrix next(2, 1);
    next << t.next_observation[0], t.next_observation[1];
    const auto qo = q_values<double>(online.forward(next), 0, support);
    const std::size_t a_star = qo[0] > qo[1] ? 0 : 1;
    const auto pt = target.forward(next);
    std::vector<double> p(5);
    for (std::size_t i = 0; i < 5; ++i) p[i] = pt(static_cast<Eigen::Index>(a_star * 5 + i), 0);
    const auto m = projection_oracle(p, 0.7, false, 0.95, support);

    DuelingNetwork<double>::Matrix obs(2, 1);
    obs << t.observation[0], t.observation[1];
    const auto po = online.forward(obs);
    double ce = 0.0;
    for (std::size_t i = 0; i < 5; ++i) ce -= m[i] * std::log(po(static_cast<Eigen::Index>(i), 0));

    const std::vector<double> w{0.6};
    const auto r = loss_and_gradient(online, target, batch, w, 0.95, support);
    CHECK(r.loss == doctest::Approx(0.6 * ce).epsilon(1e-9));
    CHECK(r.priorities[0] == doctest::Approx(ce + 1e-6).epsilon(1e-9));
}

TEST_CASE("adam moments of idle parameters flush to zero") {
    using V = ParamVector<double>;
    Adam<double> opt(2, AdamConfig{});
    V x{0.5, 0.5};
    opt.step(x, V{1.0, 1e-3});
    for (int k = 0; k < 10000; ++k) opt.step(x, V{0.0, 0.0});
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(opt.first_moment()[i] == 0.0);
        CHECK(std::fpclassify(opt.second_moment()[i]) != FP_SUBNORMAL);
    }
}

TEST_CASE("adam") {
    using V = ParamVector<double>;
    Adam<double> opt(2, AdamConfig{0.1, 0.9, 0.999, 1e-8});
    V x{1.0, -2.0};
    opt.step(x, V{3.0, -0.5});
    CHECK(x[0] == doctest::Approx(0.9));
    CHECK(x[1] == doctest::Approx(-1.9));
    CHECK(opt.steps() == 1);
    const V saved = x;
    CHECK_THROWS_AS(opt.step(x, V{std::nan(""), 0.0}), NumericalError);
    CHECK(x == saved);
    CHECK_THROWS_AS(opt.step(x, V{1.0}), ContractViolation);

    Adam<double> still(3, AdamConfig{});
    V y{0.1, 0.2, 0.3};
    const V y0 = y;
    still.step(y, V{0.0, 0.0, 0.0});
    CHECK(y == y0);

    // first step with a constant gradient moves each coordinate by lr * g / (|g| + eps)
    Adam<double> first(3, AdamConfig{});
    first.step(y, V{2.0, -2.0, 2.0});
    CHECK(y0[0] - y[0] == doctest::Approx(5e-4).epsilon(1e-6));
    CHECK(y[1] - y0[1] == doctest::Approx(5e-4).epsilon(1e-6));

    Adam<double> bowl(2, AdamConfig{0.01, 0.9, 0.999, 1e-8});
    V z{1.0, -1.0};
    for (int k = 0; k < 500; ++k) bowl.step(z, V{2.0 * (z[0] - 0.5), 2.0 * (z[1] + 0.25)});
    CHECK(std::hypot(z[0] - 0.5, z[1] + 0.25) < 1e-3);
}

TEST_CASE("sum tree") {
    SumTree tree(5);
    const std::vector<double> v{1.0, 0.0, 2.0, 3.0, 0.5};
    for (std::size_t i = 0; i < v.size(); ++i) tree.set(i, v[i]);
    CHECK(tree.total() == doctest::Approx(6.5));
    CHECK(tree.find(0.0) == 0);
    CHECK(tree.find(0.99) == 0);
    CHECK(tree.find(1.0) == 2);
    CHECK(tree.find(2.99) == 2);
    CHECK(tree.find(3.0) == 3);
    CHECK(tree.find(6.4) == 4);
    CHECK(tree.find(100.0) == 4);
    tree.set(3, 0.0);
    CHECK(tree.total() == doctest::Approx(3.5));
    CHECK(tree.find(3.2) == 4);
}

TEST_CASE("prioritized replay") {
    auto make = [](float tag) {
        Transition t;
        t.observation = {tag};
        t.next_observation = {tag};
        return t;
    };
    PrioritizedReplay buffer(4, 0.5);
    std::mt19937_64 rng(1);
    buffer.push(make(0));
    CHECK(buffer.priority(0) == 1.0);
    CHECK_THROWS_AS(buffer.sample(2, 0.4, rng), NotReadyError);
    buffer.push(make(1));
    buffer.push(make(2));
    const std::vector<std::size_t> idx{0, 1, 2};
    const std::vector<double> pr{4.0, 1.0, 9.0};
    buffer.update(idx, pr);
    CHECK(buffer.max_priority() == 9.0);
    buffer.push(make(3));
    CHECK(buffer.priority(3) == 9.0);
    buffer.push(make(4));  // evicts tag 0
    CHECK(buffer.size() == 4);
    CHECK(buffer.at(0).observation[0] == 4.0f);
    CHECK(buffer.priority(0) == 9.0);

    const double z = std::sqrt(9.0) + std::sqrt(1.0) + std::sqrt(9.0) + std::sqrt(9.0);
    CHECK(buffer.probability(1) == doctest::Approx(1.0 / z));

    SUBCASE("empirical frequencies") {
        const int n = 100000;
        std::vector<int> hits(4, 0);
        for (int k = 0; k < n / 4; ++k) {
            for (std::size_t i : buffer.sample(4, 0.4, rng).indices) ++hits[i];
        }
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(hits[i] / double(n) - buffer.probability(i)) < 0.01);
    }
    SUBCASE("importance weights") {
        const auto s = buffer.sample(4, 0.6, rng);
        double max_w = 0.0;
        std::vector<double> raw;
        for (std::size_t i : s.indices) {
            raw.push_back(std::pow(4.0 * buffer.probability(i), -0.6));
            max_w = std::max(max_w, raw.back());
        }
        for (std::size_t k = 0; k < raw.size(); ++k) CHECK(s.is_weights[k] == doctest::Approx(raw[k] / max_w));
    }
    SUBCASE("invalid priorities") {
        const std::vector<std::size_t> one{0};
        CHECK_THROWS_AS(buffer.update(one, std::vector<double>{0.0}), NumericalError);
        CHECK_THROWS_AS(buffer.update(one, std::vector<double>{std::nan("")}), NumericalError);
    }
}

TEST_CASE("replay closed-form cases") {
    std::mt19937_64 rng(3);
    PrioritizedReplay two(8, 0.5);
    two.push(Transition{{0.f}, Action::Go, 0.0, {0.f}, false});
    two.push(Transition{{1.f}, Action::Go, 0.0, {1.f}, false});
    const std::vector<std::size_t> idx{0, 1};
    two.update(idx, std::vector<double>{1.0, 4.0});
    CHECK(two.probability(0) == doctest::Approx(1.0 / 3.0));
    CHECK(two.probability(1) == doctest::Approx(2.0 / 3.0));

    PrioritizedReplay flat(8, 0.5);
    for (int i = 0; i < 5; ++i) flat.push(Transition{{float(i)}, Action::Go, 0.0, {float(i)}, false});
    const auto s = flat.sample(5, 0.7, rng);
    for (double w : s.is_weights) CHECK(w == doctest::Approx(1.0));

    PrioritizedReplay three(4, 0.5);
    for (int i = 0; i < 3; ++i) three.push(Transition{{float(i)}, Action::Go, 0.0, {float(i)}, false});
    three.update(std::vector<std::size_t>{0, 1, 2}, std::vector<double>{1.0, 4.0, 9.0});
    std::vector<int> hits(3, 0);
    for (int k = 0; k < 100000; ++k) ++hits[three.sample(1, 0.4, rng).indices[0]];
    for (int i = 0; i < 3; ++i) CHECK(std::abs(hits[i] / 1e5 - (i + 1) / 6.0) < 0.01);
}

TEST_CASE("replay probabilities stay normalised under interleaved operations") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    PrioritizedReplay buffer(37, 0.6);
    for (int k = 0; k < 500; ++k) {
        buffer.push(Transition{{float(k)}, Action::Stop, 0.0, {float(k)}, false});
        if (buffer.size() >= 8 && k % 3 == 0) {
            const auto s = buffer.sample(8, 0.5, rng);
            std::vector<double> pr;
            for (std::size_t i = 0; i < s.indices.size(); ++i) pr.push_back(u(rng));
            buffer.update(s.indices, pr);
        }
        double total = 0.0;
        double max_p = 0.0;
        for (std::size_t i = 0; i < buffer.size(); ++i) {
            total += buffer.probability(i);
            max_p = std::max(max_p, buffer.priority(i));
        }
        CHECK(std::abs(total - 1.0) < 1e-6);
        CHECK(buffer.max_priority() >= max_p);
    }
}

TEST_CASE("double-Q selection reads only the online network") {
    const Support support{-3.0, 3.0, 9};
    const NetShape shape{2, {6}, 2, 9};
    DuelingNetwork<double> online(shape);
    DuelingNetwork<double> target(shape);
    randomize(online, 31, 0.7);
    randomize(target, 32, 0.7);
    DuelingNetwork<double> swapped = target;
    // swap the two actions' advantage rows (weights and bias)
    const auto layers = shape.layers();
    const std::size_t bias_len = layers.back().rows;
    const std::size_t w_rows = layers[layers.size() - 2].rows;
    const std::size_t w_cols = layers[layers.size() - 2].cols;
    const std::size_t b_off = shape.parameter_count() - bias_len;
    const std::size_t w_off = b_off - w_rows * w_cols;
    auto& p = swapped.parameters();
    for (std::size_t i = 0; i < 9; ++i) std::swap(p[b_off + i], p[b_off + 9 + i]);
    for (std::size_t c = 0; c < w_cols; ++c) {
        for (std::size_t i = 0; i < 9; ++i) std::swap(p[w_off + c * w_rows + i], p[w_off + c * w_rows + 9 + i]);
    }

    std::mt19937_64 rng(4);
    const auto storage = random_batch(10, 2, rng);
    std::vector<const Transition*> batch;
    for (const Transition& t : storage) batch.push_back(&t);
    const auto a = double_dqn_targets(online, target, batch, 0.9, support);
    const auto b = double_dqn_targets(online, swapped, batch, 0.9, support);
    for (std::size_t k = 0; k < batch.size(); ++k) {
        DuelingNetwork<double>::Matrix x(2, 1);
        x << storage[k].next_observation[0], storage[k].next_observation[1];
        const auto q = q_values<double>(online.forward(x), 0, support);
        const std::size_t other = greedy_action(q) == Action::Go ? 1 : 0;
        const auto pt = target.forward(x);
        std::vector<double> next(9);
        for (std::size_t i = 0; i < 9; ++i) next[i] = pt(static_cast<Eigen::Index>(other * 9 + i), 0);
        const auto expected = projection_oracle(next, storage[k].reward, storage[k].done, 0.9, support);
        for (std::size_t i = 0; i < 9; ++i) CHECK(b[k][i] == doctest::Approx(expected[i]).epsilon(1e-9));
        double sum = 0.0;
        for (double m : a[k]) sum += m;
        CHECK(std::abs(sum - 1.0) < 1e-6);
        for (double v : q) {
            CHECK(v >= support.v_min - 1e-12);
            CHECK(v <= support.v_max + 1e-12);
        }
    }
}

TEST_CASE("training loop") {
    TrainConfig cfg;
    cfg.hidden = {16};
    cfg.batch_size = 8;
    cfg.buffer_capacity = 500;
    cfg.target_sync_interval = 50;
    cfg.seed = 3;

    SUBCASE("zero episodes keeps the initial weights") {
        testing::ToyMdp env;
        cfg.episodes = 0;
        const auto r = train(env, cfg);
        DuelingNetwork<float> init(cfg.shape(2));
        init.initialize(3);
        CHECK(r.network.parameters() == init.parameters());
        CHECK(r.log.empty());
        CHECK(r.gradient_steps == 0);
    }
    SUBCASE("update cadence, log and determinism") {
        testing::ToyMdp env(40);
        cfg.episodes = 5;
        cfg.eval_interval = 2;
        int calls = 0;
        std::size_t seen = 0;
        TrainHooks hooks;
        hooks.on_transition = [&](int, const EnvTransition&) { ++seen; };
        hooks.evaluate = [&](const DuelingNetwork<float>&) { return double(++calls); };
        const auto r = train(env, cfg, hooks);
        REQUIRE(r.log.size() == 5);
        CHECK(seen == 200);
        CHECK(calls == 2);
        CHECK(r.log[1].eval_w_bar == 1.0);
        CHECK_FALSE(r.log[0].eval_w_bar.has_value());
        // one update per 4 env steps once 8 transitions are stored
        CHECK(r.gradient_steps == 50 - 1);
        CHECK(r.log.back().buffer_size == 200);
        CHECK(r.log[0].epsilon <= 1.0);
        CHECK(r.log.back().epsilon < r.log[0].epsilon);
        CHECK_FALSE(r.diverged);

        testing::ToyMdp env2(40);
        const auto again = train(env2, cfg, hooks);
        CHECK(again.network.parameters() == r.network.parameters());

        const auto path = std::filesystem::temp_directory_path() / "mtc_train_log.csv";
        write_train_log(r.log, path);
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        CHECK(header == "episode,steps,gradient_steps,agents,mean_return,mean_loss,epsilon,buffer_size,eval_w_bar");
        std::filesystem::remove(path);
    }
    SUBCASE("divergence guard") {
        testing::ToyMdp env(40);
        cfg.episodes = 20;
        cfg.divergence_threshold = 1e-6;
        cfg.divergence_window = 1;
        const auto r = train(env, cfg);
        CHECK(r.diverged);
        CHECK(r.log.size() < 20);
    }
}

TEST_CASE("toy MDP value iteration oracle") {
    const auto q = testing::ToyMdp::optimal_q(0.9);
    CHECK(q[0][0] == doctest::Approx(5.5));
    CHECK(q[0][1] == doctest::Approx(4.95));
    CHECK(q[1][0] == doctest::Approx(3.95));
    CHECK(q[1][1] == doctest::Approx(5.0));
}

TEST_CASE("replay sampling frequencies on a larger buffer") {
    PrioritizedReplay buffer(64, 0.5);
    std::mt19937_64 rng(7);
    std::vector<std::size_t> idx;
    std::vector<double> pr;
    for (std::size_t i = 0; i < 40; ++i) {
        buffer.push(Transition{{float(i)}, Action::Go, 0.0, {float(i)}, false});
        idx.push_back(i);
        pr.push_back(0.1 + 0.3 * static_cast<double>(i % 7));
    }
    buffer.update(idx, pr);
    std::vector<int> hits(40, 0);
    for (int k = 0; k < 100000 / 32 + 1; ++k) {
        for (std::size_t i : buffer.sample(32, 1.0, rng).indices) ++hits[i];
    }
    const double total = std::accumulate(hits.begin(), hits.end(), 0.0);
    double z = 0.0;
    for (double p : pr) z += std::sqrt(p);
    for (std::size_t i = 0; i < 40; ++i) CHECK(std::abs(hits[i] / total - std::sqrt(pr[i]) / z) < 0.01);
}

TEST_CASE("schedules and seeds") {
    TrainConfig cfg;
    CHECK(epsilon_at(cfg, 0, 1000) == doctest::Approx(1.0));
    CHECK(epsilon_at(cfg, 150, 1000) == doctest::Approx(0.51));
    CHECK(epsilon_at(cfg, 300, 1000) == doctest::Approx(0.02));
    CHECK(epsilon_at(cfg, 900, 1000) == doctest::Approx(0.02));
    CHECK(eta_at(cfg, 0, 1000) == doctest::Approx(0.4));
    CHECK(eta_at(cfg, 500, 1000) == doctest::Approx(0.7));
    CHECK(eta_at(cfg, 5000, 1000) == doctest::Approx(1.0));
    CHECK(derive_seed(1, 1) != derive_seed(1, 2));
    CHECK(derive_seed(1, 1) != derive_seed(2, 1));
    CHECK(derive_seed(5, 9) == derive_seed(5, 9));

    TrainConfig bad;
    bad.gamma = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = TrainConfig{};
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("checkpoint round trip") {
    TrainConfig cfg;
    cfg.hidden = {16, 8};
    cfg.seed = 42;
    cfg.episodes = 3;
    DuelingNetwork<float> net(cfg.shape(12));
    randomize(net, 3, 0.5);
    TrainResult result{net, {}, 77, false};
    const Checkpoint ckpt = make_checkpoint(result, cfg);

    const auto dir = std::filesystem::temp_directory_path() / "mtc_ckpt_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "a.ckpt";
    save_checkpoint(ckpt, path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.config == cfg);
    CHECK(back.shape == cfg.shape(12));
    CHECK(back.seed == 42);
    CHECK(back.gradient_steps == 77);
    CHECK(back.parameters == net.parameters());
    CHECK(back.network().parameters() == net.parameters());

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(bytes.substr(0, 8) == "MTCCKPT1");

    {
        std::ofstream out(dir / "short.ckpt", std::ios::binary);
        out << bytes.substr(0, bytes.size() - 3);
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), CheckpointError);
    {
        std::ofstream out(dir / "magic.ckpt", std::ios::binary);
        out << "XXXXXXXX" << bytes.substr(8);
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("train config json is strict") {
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.hidden = {64};
    const auto j = train_config_to_json(cfg);
    CHECK(train_config_from_json(nlohmann::json::parse(j.dump()), "train") == cfg);
    auto extra = nlohmann::json::parse(j.dump());
    extra["lerning_rate"] = 0.1;
    CHECK_THROWS_AS(train_config_from_json(extra, "train"), ConfigError);
    auto wrong = nlohmann::json::parse(j.dump());
    wrong["batch_size"] = "big";
    CHECK_THROWS_AS(train_config_from_json(wrong, "train"), ConfigError);
}
