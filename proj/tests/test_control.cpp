#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "sc3/channel.hpp"
#include "sc3/control.hpp"

using namespace sc3;
using namespace sc3::control;

namespace {

scene::Scene open_field(std::vector<Vec3> users, double bits, double w = 1000.0, double d = 1000.0) {
    scene::Scene s;
    s.bounds = {w, d};
    for (const auto& u : users) s.users.push_back({u, bits, bits});
    return s;
}

// Downlink rate straight from the link budget, clutter mix included.
double rate_oracle(const Vec3& uav, const Vec3& user, const ServiceModel& m) {
    const double d = (uav - user).norm();
    const double horiz = std::hypot(uav.x() - user.x(), uav.y() - user.y());
    const double theta = std::atan2(uav.z() - user.z(), horiz) * 180.0 / kPi;
    const double p = 1.0 / (1.0 + m.clutter_a * std::exp(-m.clutter_b * (theta - m.clutter_a)));
    const double excess_db = p * m.los_excess_db + (1.0 - p) * m.nlos_excess_db;
    const double fspl_db = 20.0 * std::log10(4.0 * kPi * d * m.budget.carrier / kSpeedOfLight);
    const double noise = kBoltzmann * kNoiseTemperature * std::pow(10.0, m.budget.noise_figure_db / 10.0) * m.bandwidth;
    const double snr = m.budget.tx_power * std::pow(10.0, (m.budget.antenna_gain_dbi - fspl_db - excess_db) / 10.0) / noise;
    return snr < std::pow(10.0, m.snr_min_db / 10.0) ? 0.0 : m.bandwidth * std::log2(1.0 + snr);
}

KnownMap open_map(const scene::Scene& s, double cell = 5.0) { return ground_truth_map(s, cell, 5.0); }

// 8-connected shortest path over free cells, no corner cutting.
double grid_shortest(const scene::OccupancyGrid& g, std::size_t s, std::size_t t) {
    std::vector<double> dist(g.nx * g.ny, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[s] = 0.0;
    pq.push({0.0, s});
    while (!pq.empty()) {
        const auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        const long ux = static_cast<long>(u % g.nx), uy = static_cast<long>(u / g.nx);
        for (long dy = -1; dy <= 1; ++dy)
            for (long dx = -1; dx <= 1; ++dx) {
                const long vx = ux + dx, vy = uy + dy;
                if ((dx == 0 && dy == 0) || vx < 0 || vy < 0 || vx >= static_cast<long>(g.nx) ||
                    vy >= static_cast<long>(g.ny))
                    continue;
                auto occ = [&](long x, long y) { return g.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)); };
                if (occ(vx, vy) || occ(ux + dx, uy) || occ(ux, uy + dy)) continue;
                const double nd = d + g.cell * std::hypot(static_cast<double>(dx), static_cast<double>(dy));
                const auto v = static_cast<std::size_t>(vy) * g.nx + static_cast<std::size_t>(vx);
                if (nd < dist[v]) {
                    dist[v] = nd;
                    pq.push({nd, v});
                }
            }
    }
    return dist[t];
}

}  // namespace

TEST_SUITE("control") {
    TEST_CASE("action set respects the speed cap") {
        const auto acts = action_set(40.0);
        CHECK(acts.size() == 11);
        for (const auto& a : acts) CHECK(a.velocity.norm() <= 40.0 + 1e-12);
    }

    TEST_CASE("rate agrees with the link budget") {
        const ServiceModel m;
        const scene::Scene s;
        for (const Vec3& uav : {Vec3(0, 0, 20), Vec3(30, 40, 50), Vec3(300, 0, 110), Vec3(900, 0, 20)})
            CHECK(m.rate(uav, Vec3::Zero(), s) == doctest::Approx(rate_oracle(uav, Vec3::Zero(), m)).epsilon(1e-10));
    }

    TEST_CASE("hover with nobody in range") {
        const auto s = open_field({Vec3(990, 990, 0)}, 1e6);
        EnvConfig env;
        const auto st = initial_state(s, env);
        const auto o = env_step(st, action_set(env.speed)[0], s, env);
        CHECK(o.next.position == st.position);
        CHECK_FALSE(o.service.user.has_value());
        CHECK(o.reward == doctest::Approx(-env.weights.per_second * env.dt));
        CHECK_FALSE(o.terminal);

        std::vector<Vec3> still(21, env.start);
        env.time_limit = 5.0;
        const auto r = replay(still, s, env);
        CHECK(r.time_limited);
        CHECK_FALSE(r.completed);
        CHECK(r.served[0] < 1e6);
    }

    TEST_CASE("flying into a building ends the episode") {
        auto s = open_field({Vec3(500, 500, 0)}, 1e6);
        s.buildings.push_back({Vec2(50, 37.5), 10, 10, 50});
        EnvConfig env;
        const auto o = env_step(initial_state(s, env), action_set(env.speed)[1], s, env);
        CHECK(o.collision);
        CHECK(o.terminal);
        CHECK(o.reward <= -env.weights.collision);
    }

    TEST_CASE("hover service time matches the closed form") {
        const Vec3 user(500, 500, 0);
        const double bits = 40e6;
        const auto s = open_field({user}, bits);
        EnvConfig env;
        env.start = Vec3(520, 500, 50);
        const double r = rate_oracle(env.start, user, env.service);
        REQUIRE(r > 0.0);
        std::vector<Vec3> still(2000, env.start);
        const auto res = replay(still, s, env);
        REQUIRE(res.completed);
        CHECK(std::abs(res.completion_time - bits / r) <= env.dt);
        CHECK(res.served[0] == doctest::Approx(bits));
    }

    TEST_CASE("replayed trajectories reproduce served bits") {
        const auto s = open_field({Vec3(100, 100, 0), Vec3(300, 120, 0)}, 30e6);
        EnvConfig env;
        const auto r1 = plan_rrt(s, open_map(s), env, RrtConfig{}, 4);
        REQUIRE(r1.completed);
        std::vector<Vec3> pos;
        for (const auto& w : r1.trajectory) pos.push_back(w.position);
        const auto r2 = replay(pos, s, env);
        CHECK(r2.served == r1.served);
        CHECK(r2.completion_time == doctest::Approx(r1.completion_time));
        for (std::size_t i = 1; i < r1.trajectory.size(); ++i) {
            const auto& a = r1.trajectory[i - 1];
            const auto& b = r1.trajectory[i];
            if (b.t > a.t) CHECK((b.position - a.position).norm() / (b.t - a.t) <= env.speed + 1e-9);
        }
        const auto again = plan_rrt(s, open_map(s), env, RrtConfig{}, 4);
        CHECK(again.trajectory.size() == r1.trajectory.size());
        CHECK(again.completion_time == r1.completion_time);
    }

    TEST_CASE("zero payload completes at once") {
        const auto s = open_field({Vec3(400, 400, 0)}, 0.0);
        EnvConfig env;
        const auto m = open_map(s);
        QConfig q;
        q.episodes = 20;
        const auto tr = train_rl(s, m, env, q, 1);
        const auto r = evaluate(tr.policy, s, m, env);
        CHECK(r.completed);
        CHECK(r.completion_time == 0.0);
        CHECK(plan_rrt(s, m, env, RrtConfig{}, 1).completion_time == 0.0);
        CHECK(plan_aco(s, m, env, AcoConfig{}, 1).completion_time == 0.0);
    }

    TEST_CASE("q-learning near a single user") {
        EnvConfig env;
        const Vec3 user(62.5, 37.5, 0);
        const double bits = 200e6;
        const auto s = open_field({user}, bits, 300, 300);
        const auto m = open_map(s);
        QConfig q;
        q.episodes = 400;
        const auto tr = train_rl(s, m, env, q, 5);
        const auto r = evaluate(tr.policy, s, m, env);
        REQUIRE(r.completed);
        CHECK(r.collisions == 0);
        // nothing can serve faster than the best rate at the lowest layer
        const double bound = bits / rate_oracle(Vec3(user.x(), user.y(), env.layers.front()), user, env.service);
        CHECK(r.completion_time <= 1.5 * bound);

        const auto again = train_rl(s, m, env, q, 5);
        bool same = again.curve.size() == tr.curve.size();
        for (std::size_t i = 0; same && i < tr.curve.size(); ++i)
            same = again.curve[i].episode_return == tr.curve[i].episode_return;
        CHECK(same);
        for (std::size_t st = 0; st < tr.policy.states(); ++st)
            for (std::size_t a = 0; a < tr.policy.actions(); ++a)
                if (tr.policy.row(st)[a] != again.policy.row(st)[a]) FAIL("policies differ");
    }

    TEST_CASE("training curve improves on a spread-out mission") {
        EnvConfig env;
        const auto s = open_field({Vec3(250, 60, 0), Vec3(420, 380, 0), Vec3(90, 450, 0)}, 10e6, 500, 500);
        const auto m = open_map(s);
        QConfig q;
        q.episodes = 1000;
        const auto tr = train_rl(s, m, env, q, 9);
        const std::size_t tenth = tr.curve.size() / 10;
        std::vector<double> first, last;
        for (std::size_t i = 0; i < tenth; ++i) {
            first.push_back(tr.curve[i].completion_time);
            last.push_back(tr.curve[tr.curve.size() - 1 - i].completion_time);
        }
        std::sort(first.begin(), first.end());
        std::sort(last.begin(), last.end());
        CHECK(last[last.size() / 2] <= first[first.size() / 2]);
    }

    TEST_CASE("known map keeps the margin") {
        scene::Scene s;
        s.buildings.push_back({Vec2(100, 100), 30, 20, 40});
        s.buildings.push_back({Vec2(200, 60), 10, 50, 25});
        const auto m = ground_truth_map(s, 5.0, 5.0);
        CHECK(m.ceiling == doctest::Approx(45.0));
        for (std::size_t iy = 0; iy < m.grid.ny; ++iy)
            for (std::size_t ix = 0; ix < m.grid.nx; ++ix) {
                if (m.grid.at(ix, iy)) continue;
                const Vec2 c = m.grid.cell_center(ix, iy);
                for (double ox : {-2.5, 2.5})
                    for (double oy : {-2.5, 2.5}) {
                        const Vec3 p(c.x() + ox, c.y() + oy, 10.0);
                        if (p.x() > 0 && p.y() > 0 && p.x() < 1000 && p.y() < 1000) CHECK_FALSE(collides(p, s, 5.0 - 1e-9));
                    }
            }
        CHECK(m.blocked(Vec3(100, 100, 44)));
        CHECK_FALSE(m.blocked(Vec3(100, 100, 46)));
    }

    TEST_CASE("rrt in free space stays near the straight line") {
        const auto s = open_field({}, 0.0);
        const auto m = open_map(s);
        const Vec3 a(100, 500, 25), b(900, 500, 25);
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            Rng rng(seed);
            const auto p = rrt_path(m, a, b, RrtConfig{}, rng);
            REQUIRE(p.has_value());
            CHECK(path_length(*p) <= 1.3 * (b - a).norm());
        }
    }

    TEST_CASE("rrt through a corridor maze") {
        scene::Scene s;
        s.bounds = {200, 200};
        scene::OccupancyGrid g(Vec2::Zero(), 5.0, 40, 40);
        // walls at x = 50 and x = 150 open at the top, x = 100 open at the bottom
        for (std::size_t iy = 0; iy < 40; ++iy) {
            if (iy < 30) g.set(10, iy, true), g.set(30, iy, true);
            if (iy >= 10) g.set(20, iy, true);
        }
        const auto m = map_from_occupancy(g, 1000.0, s.bounds);
        const Vec3 a(27.5, 27.5, 25), b(177.5, 27.5, 25);
        const double shortest = grid_shortest(g, 5 * 40 + 5, 5 * 40 + 35);
        REQUIRE(std::isfinite(shortest));
        RrtConfig cfg;
        cfg.step = 5.0;
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            Rng rng(seed);
            const auto p = rrt_path(m, a, b, cfg, rng);
            REQUIRE(p.has_value());
            CHECK(path_length(*p) <= 2.0 * shortest);
            for (std::size_t i = 0; i + 1 < p->size(); ++i) CHECK(m.segment_free((*p)[i], (*p)[i + 1]));
        }
    }

    TEST_CASE("aco tour against exhaustive search") {
        Rng pts(11);
        std::uniform_real_distribution<double> u(0.0, 100.0);
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<Vec2> p(5);
            for (auto& v : p) v = Vec2(u(pts), u(pts));
            std::vector<std::vector<double>> cost(5, std::vector<double>(5));
            for (std::size_t i = 0; i < 5; ++i)
                for (std::size_t j = 0; j < 5; ++j) cost[i][j] = (p[i] - p[j]).norm();
            std::vector<std::size_t> perm{1, 2, 3, 4};
            double best = std::numeric_limits<double>::infinity();
            do {
                double c = cost[0][perm[0]];
                for (std::size_t i = 0; i + 1 < perm.size(); ++i) c += cost[perm[i]][perm[i + 1]];
                best = std::min(best, c);
            } while (std::next_permutation(perm.begin(), perm.end()));
            Rng rng(static_cast<std::uint64_t>(trial));
            const auto order = aco_tour(cost, AcoConfig{}, rng);
            REQUIRE(order.size() == 5);
            CHECK(order.front() == 0);
            double c = 0.0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) c += cost[order[i]][order[i + 1]];
            CHECK(c == doctest::Approx(tour_cost(cost, order)));
            CHECK(c <= 1.1 * best);
        }
    }

    TEST_CASE("aco on a two-node graph") {
        scene::Scene s;
        s.bounds = {10, 5};
        const auto m = ground_truth_map(s, 5.0, 0.0);
        const auto g = grid_graph(m, 5.0, 20.0, 8);
        REQUIRE(g.free.size() == 2);
        Rng rng(1);
        const auto p = aco_grid_path(g, 0, 1, AcoConfig{}, rng);
        REQUIRE(p.has_value());
        CHECK(*p == std::vector<std::size_t>{0, 1});
    }
}
