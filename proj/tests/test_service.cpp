#include "opcal/commands.hpp"
#include "opcal/errors.hpp"
#include "opcal/rng.hpp"
#include "opcal/service.hpp"

#include <doctest.h>
#include <httplib.h>

#include <filesystem>
#include <thread>

using namespace opcal;
using namespace opcal::opsd;
namespace fs = std::filesystem;

namespace {

ScoreSample sample(long n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> p;
    std::vector<int> y;
    for (long i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const double u = rng.uniform_open();
        p.push_back(label == 1 ? 0.3 + 0.7 * u : 0.7 * u);
        y.push_back(label);
    }
    return sample_from_probabilities(p, y);
}

const char* kSpec = R"({"id": "m", "calibration": "cal", "audit": "aud",
  "alpha0": [0.05, 0.1, 0.2], "delta0": 0.1, "alpha1": [0.05, 0.1, 0.2], "delta1": 0.1})";

struct Fixture {
    fs::path dir;
    ArtifactStore store;
    std::vector<OperatingPoint> points;

    explicit Fixture(const std::string& name)
        : dir(fs::temp_directory_path() / ("opcal_service_" + name)), store((fs::remove_all(dir), dir)) {
        store.put_dataset({"cal", sample(400, 1), {"mem", "", 400, 400}});
        store.put_dataset({"aud", sample(400, 2), {"mem", "", 400, 400}});
        points = run_sweep(store, parse_sweep_job(kSpec)).points;
    }
};

} // namespace

TEST_CASE("datasets and menus") {
    Fixture fx("basic");
    Service svc(fx.store);
    auto r = svc.get("/datasets", {});
    CHECK(r.status == 200);
    REQUIRE(r.body.at("datasets").size() == 2);
    CHECK(r.body.at("datasets")[0].at("id") == "aud");
    CHECK(r.body.at("datasets")[0].at("rows") == 400);
    CHECK(r.body.at("schema_version") == kSchemaVersion);

    r = svc.get("/menus/m", {});
    CHECK(r.status == 200);
    CHECK(r.body == fx.store.get("menus", "m"));

    CHECK(svc.get("/menus/zzz", {}).status == 404);
    CHECK(svc.get("/nowhere", {}).status == 404);
    CHECK(svc.get("/envelopes/m/999", {}).status == 404);
    CHECK(svc.get("/envelopes/m/abc", {}).status == 404);
    CHECK(svc.get("/menus/..%2Fx", {}).status != 200);
}

TEST_CASE("front follows the requested orientation") {
    Fixture fx("front");
    Service svc(fx.store);
    const auto kpis = SweepSpec::default_kpis();
    auto orient = SweepSpec::default_orientation();

    auto front_of = [&](const std::vector<int>& o) {
        std::vector<std::vector<double>> v;
        for (const auto& p : fx.points) v.push_back(p.rate_vector());
        const auto flags = planner::pareto_filter(v, o);
        std::vector<long> ids;
        for (std::size_t i = 0; i < flags.size(); ++i) {
            if (flags[i]) ids.push_back(fx.points[i].regime_id);
        }
        return ids;
    };
    auto r = svc.get("/menus/m/front", {});
    CHECK(r.status == 200);
    CHECK(r.body.at("front").get<std::vector<long>>() == front_of(orient));

    orient[1] = -orient[1];
    std::string q;
    for (int s : orient) q += (q.empty() ? "" : ",") + std::to_string(s);
    r = svc.get("/menus/m/front", {{"orientation", q}});
    CHECK(r.status == 200);
    CHECK(r.body.at("front").get<std::vector<long>>() == front_of(orient));
    CHECK(r.body.at("orientation").get<std::vector<int>>() == orient);

    CHECK(svc.get("/menus/m/front", {{"orientation", "1,-1"}}).status == 422);
    CHECK(svc.get("/menus/m/front", {{"orientation", "up,down,1,1,1,1,1,1"}}).status == 422);
}

TEST_CASE("envelopes at a new window equal the library call") {
    Fixture fx("env");
    Service svc(fx.store);
    const auto& p = fx.points.front();
    const auto r = svc.get("/envelopes/m/" + std::to_string(p.regime_id), {{"m", "1000"}});
    REQUIRE(r.status == 200);
    CHECK(r.body.at("m") == 1000);
    const auto& envs = r.body.at("envelopes");
    REQUIRE(envs.size() == p.kpis.size());
    for (std::size_t i = 0; i < p.kpis.size(); ++i) {
        const auto direct = audit::envelope_two_sample(p.kpis[i].count, p.table.n_total, 1000, 0.95);
        CHECK(envs[i].at("lo") == direct.lo);
        CHECK(envs[i].at("hi") == direct.hi);
        CHECK(envs[i].at("point").get<double>() == doctest::Approx(direct.point));
    }
    // inflation widens
    const auto wide = svc.get("/envelopes/m/" + std::to_string(p.regime_id), {{"m", "1000"}, {"infl", "3"}});
    for (std::size_t i = 0; i < p.kpis.size(); ++i) {
        CHECK(wide.body.at("envelopes")[i].at("lo").get<long>() <= envs[i].at("lo").get<long>());
        CHECK(wide.body.at("envelopes")[i].at("hi").get<long>() >= envs[i].at("hi").get<long>());
    }
    const std::string path = "/envelopes/m/" + std::to_string(p.regime_id);
    CHECK(svc.get(path, {{"m", "0"}}).status == 422);
    CHECK(svc.get(path, {{"m", "ten"}}).status == 422);
    CHECK(svc.get(path, {{"m", "2.5"}}).status == 422);
    CHECK(svc.get(path, {{"level", "1.5"}}).status == 422);
    CHECK(svc.get(path, {{"infl", "0.5"}}).status == 422);
    // stateless: same query, same answer
    CHECK(svc.get(path, {{"m", "1000"}}).body == r.body);
}

TEST_CASE("coherence endpoint") {
    Fixture fx("coh");
    Service svc(fx.store);
    const OperatingPoint* hedging = nullptr;
    for (const auto& p : fx.points) {
        if (p.table.region_count(Region::R11) > 0 || p.table.region_count(Region::R00) > 0) hedging = &p;
    }
    REQUIRE(hedging != nullptr);
    const std::string path = "/coherence/m/" + std::to_string(hedging->regime_id);
    auto r = svc.get(path, {{"lambda", "1"}, {"rho", "0.6"}});
    REQUIRE(r.status == 200);
    CHECK(r.body.at("rejection_band_nonempty") == false);
    CHECK(r.body.at("feasible") == false);
    const auto direct = geometry::check_convention(hedging->table, Convention::commit_on_singletons(),
                                                   CostRates::from_ratios(1.0, 0.6));
    CHECK(r.body.at("report") == json(direct));

    r = svc.get(path, {{"lambda_grid", "0.5,1,2"}, {"rho_grid", "0,0.25,0.5"}});
    REQUIRE(r.status == 200);
    const auto env = geometry::pricing_envelope(hedging->table, Convention::commit_on_singletons(), {0.5, 1, 2},
                                                {0, 0.25, 0.5});
    CHECK(r.body.at("envelope") == json(env));
    r = svc.get(path, {});
    CHECK(r.body.at("envelope").at("lambda_grid").size() == 41);

    CHECK(svc.get(path, {{"lambda", "1"}}).status == 422);
    CHECK(svc.get(path, {{"lambda", "-1"}, {"rho", "0.2"}}).status == 422);
    CHECK(svc.get(path, {{"convention", "bogus"}}).status == 422);
    CHECK(svc.get(path, {{"lambda_points", "1"}}).status == 422);
}

TEST_CASE("asynchronous sweeps") {
    Fixture fx("jobs");
    Service svc(fx.store);
    std::string body = kSpec;
    body.replace(body.find("\"m\""), 3, "\"m2\"");
    auto r = svc.post("/sweeps", body);
    CHECK(r.status == 202);
    CHECK(r.body.at("job") == "m2");
    CHECK(svc.post("/sweeps", body).status == 409);
    svc.wait_idle();
    r = svc.get("/sweeps/m2", {});
    CHECK(r.status == 200);
    CHECK(r.body.at("status") == "done");
    CHECK(r.body.at("summary").at("points") == 9);
    CHECK(svc.get("/menus/m2", {}).body.at("points").size() == fx.points.size());
    CHECK(svc.post("/sweeps", body).status == 409);
    // the menu written by the CLI path also blocks the id
    CHECK(svc.post("/sweeps", kSpec).status == 409);

    CHECK(svc.post("/sweeps", "{not json").status == 422);
    CHECK(svc.post("/other", "{}").status == 404);
    CHECK(svc.get("/sweeps/none", {}).status == 404);

    // a job that fails at run time is reported as failed
    std::string bad = kSpec;
    bad.replace(bad.find("\"m\""), 3, "\"m3\"");
    bad.replace(bad.find("\"aud\""), 5, "\"missing\"");
    CHECK(svc.post("/sweeps", bad).status == 202);
    svc.wait_idle();
    r = svc.get("/sweeps/m3", {});
    CHECK(r.body.at("status") == "failed");
    CHECK(svc.get("/menus/m3", {}).status == 404);
}

TEST_CASE("http round trip") {
    Fixture fx("http");
    Service svc(fx.store);
    httplib::Server server;
    mount(svc, server);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto res = client.Get("/menus/m/front");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body) == svc.get("/menus/m/front", {}).body);
    res = client.Get("/envelopes/m/1?m=250&level=0.9");
    REQUIRE(res);
    CHECK(json::parse(res->body) == svc.get("/envelopes/m/1", {{"m", "250"}, {"level", "0.9"}}).body);
    res = client.Get("/menus/absent");
    REQUIRE(res);
    CHECK(res->status == 404);
    std::string body = kSpec;
    body.replace(body.find("\"m\""), 3, "\"viahttp\"");
    res = client.Post("/sweeps", body, "application/json");
    REQUIRE(res);
    CHECK(res->status == 202);
    svc.wait_idle();
    res = client.Get("/sweeps/viahttp");
    REQUIRE(res);
    CHECK(json::parse(res->body).at("status") == "done");

    server.stop();
    t.join();
}
