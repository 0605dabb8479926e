#include "opcal/service.hpp"

#include "opcal/errors.hpp"

#include <httplib.h>

#include <cmath>
#include <sstream>

namespace opcal::opsd {

namespace {

/// Rejected query parameters; rendered as 422.
class BadQuery : public Error {
public:
    using Error::Error;
};

ApiResponse error_response(int status, const std::string& message) {
    return {status, document("error", {{"status", status}, {"error", message}})};
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, sep)) out.push_back(part);
    return out;
}

std::optional<double> number_param(const QueryParams& params, const std::string& name) {
    const auto it = params.find(name);
    if (it == params.end()) return std::nullopt;
    try {
        const double v = planner::parse_double(it->second);
        if (!std::isfinite(v)) throw SpecError("not finite");
        return v;
    } catch (const SpecError&) {
        throw BadQuery("query parameter '" + name + "' must be a number, got '" + it->second + "'");
    }
}

std::optional<long> integer_param(const QueryParams& params, const std::string& name) {
    const auto v = number_param(params, name);
    if (!v) return std::nullopt;
    if (*v != std::floor(*v) || std::abs(*v) > 1e15) throw BadQuery("query parameter '" + name + "' must be an integer");
    return static_cast<long>(*v);
}

std::vector<double> list_param(const QueryParams& params, const std::string& name) {
    std::vector<double> out;
    const auto it = params.find(name);
    if (it == params.end()) return out;
    for (const auto& part : split(it->second, ',')) {
        try {
            out.push_back(planner::parse_double(part));
        } catch (const SpecError&) {
            throw BadQuery("query parameter '" + name + "' must be a comma-separated list of numbers");
        }
    }
    return out;
}

struct MenuContext {
    json doc;
    std::vector<OperatingPoint> points;
};

MenuContext load_menu(const ArtifactStore& store, const std::string& id) {
    MenuContext ctx{store.get("menus", id), {}};
    ctx.points = load_menu_points(ctx.doc);
    return ctx;
}

const OperatingPoint& find_regime(const MenuContext& ctx, const std::string& menu, const std::string& regime) {
    long id = 0;
    try {
        id = std::stol(regime);
    } catch (const std::exception&) {
        throw NotFound("menu '" + menu + "' has no regime '" + regime + "'");
    }
    for (const auto& p : ctx.points) {
        if (p.regime_id == id) return p;
    }
    throw NotFound("menu '" + menu + "' has no regime '" + regime + "'");
}

} // namespace

Service::Service(ArtifactStore& store) : store_(store) { worker_ = std::thread([this] { worker_loop(); }); }

Service::~Service() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        stop_ = true;
    }
    cv_.notify_all();
    worker_.join();
}

ApiResponse Service::get(const std::string& path, const QueryParams& params) const {
    std::vector<std::string> seg;
    for (auto& s : split(path, '/')) {
        if (!s.empty()) seg.push_back(s);
    }
    try {
        if (seg.size() == 1 && seg[0] == "datasets") return get_datasets();
        if (seg.size() == 2 && seg[0] == "menus") return get_menu(seg[1]);
        if (seg.size() == 3 && seg[0] == "menus" && seg[2] == "front") return get_front(seg[1], params);
        if (seg.size() == 3 && seg[0] == "envelopes") return get_envelopes(seg[1], seg[2], params);
        if (seg.size() == 3 && seg[0] == "coherence") return get_coherence(seg[1], seg[2], params);
        if (seg.size() == 2 && seg[0] == "sweeps") return get_job(seg[1]);
        return error_response(404, "no route for GET " + path);
    } catch (const NotFound& e) {
        return error_response(404, e.what());
    } catch (const BadQuery& e) {
        return error_response(422, e.what());
    } catch (const DomainError& e) {
        // malformed ids and out-of-range parameters
        return error_response(422, e.what());
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

ApiResponse Service::post(const std::string& path, const std::string& body) {
    if (path != "/sweeps") return error_response(404, "no route for POST " + path);
    try {
        return post_sweep(body);
    } catch (const SpecError& e) {
        return error_response(422, e.what());
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

ApiResponse Service::get_datasets() const {
    json list = json::array();
    for (const auto& id : store_.list("datasets")) {
        const Dataset d = store_.get_dataset(id);
        list.push_back({{"id", d.id},
                        {"rows", d.sample.size()},
                        {"n0", d.sample.class_count(0)},
                        {"n1", d.sample.class_count(1)},
                        {"source", d.provenance.source},
                        {"filter", d.provenance.filter}});
    }
    return {200, document("dataset_list", {{"datasets", list}})};
}

ApiResponse Service::get_menu(const std::string& id) const { return {200, store_.get("menus", id)}; }

ApiResponse Service::get_front(const std::string& id, const QueryParams& params) const {
    const MenuContext ctx = load_menu(store_, id);
    std::vector<int> orientation = ctx.doc.at("orientation").get<std::vector<int>>();
    if (const auto it = params.find("orientation"); it != params.end()) {
        orientation.clear();
        for (const auto& part : split(it->second, ',')) {
            if (part == "1" || part == "+1" || part == "+") orientation.push_back(1);
            else if (part == "-1" || part == "-") orientation.push_back(-1);
            else throw BadQuery("orientation entries must be +1 or -1, got '" + part + "'");
        }
        if (orientation.size() != ctx.doc.at("kpis").size()) {
            throw BadQuery("orientation needs " + std::to_string(ctx.doc.at("kpis").size()) + " entries");
        }
    }
    std::vector<std::vector<double>> vectors;
    for (const auto& p : ctx.points) vectors.push_back(p.rate_vector());
    const auto flags = planner::pareto_filter(vectors, orientation);
    json front = json::array();
    json points = json::array();
    for (std::size_t i = 0; i < ctx.points.size(); ++i) {
        if (flags[i]) front.push_back(ctx.points[i].regime_id);
        points.push_back({{"regime_id", ctx.points[i].regime_id}, {"rates", vectors[i]}, {"nondominated", bool(flags[i])}});
    }
    return {200, document("front", {{"menu", id},
                                    {"kpis", ctx.doc.at("kpis")},
                                    {"orientation", orientation},
                                    {"front", front},
                                    {"points", points}})};
}

ApiResponse Service::get_envelopes(const std::string& menu, const std::string& regime, const QueryParams& params) const {
    const MenuContext ctx = load_menu(store_, menu);
    const OperatingPoint& p = find_regime(ctx, menu, regime);
    const json& job = ctx.doc.at("job");
    const bool loo = p.eval == EvalMode::LOO;
    const long m = integer_param(params, "m").value_or(job.at("m").get<long>());
    const double level = number_param(params, "level").value_or(job.at("level").get<double>());
    const double infl = number_param(params, "infl").value_or(loo ? job.at("infl").get<double>() : 1.0);
    const double offset = job.at("offset").get<double>();
    if (m < 1) throw BadQuery("m must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw BadQuery("level must lie in (0, 1)");
    if (!(infl >= 1.0)) throw BadQuery("infl must be >= 1");
    const EnvelopeSource source = loo ? EnvelopeSource::LOO : EnvelopeSource::TwoSample;
    json envelopes = json::array();
    for (const auto& k : p.kpis) {
        envelopes.push_back(audit::envelope_from_counts(static_cast<double>(k.count), static_cast<double>(p.table.n_total),
                                                        m, level, infl, offset, source, k.name));
    }
    return {200, document("envelopes", {{"menu", menu},
                                        {"regime_id", p.regime_id},
                                        {"n", p.table.n_total},
                                        {"m", m},
                                        {"level", level},
                                        {"infl", infl},
                                        {"offset", offset},
                                        {"source", to_string(source)},
                                        {"envelopes", envelopes}})};
}

ApiResponse Service::get_coherence(const std::string& menu, const std::string& regime, const QueryParams& params) const {
    const MenuContext ctx = load_menu(store_, menu);
    const OperatingPoint& p = find_regime(ctx, menu, regime);
    Convention conv = Convention::commit_on_singletons();
    if (const auto it = params.find("convention"); it != params.end()) {
        try {
            conv = Convention::parse(it->second);
        } catch (const DomainError& e) {
            throw BadQuery(e.what());
        }
    }
    const auto lambda = number_param(params, "lambda");
    const auto rho = number_param(params, "rho");
    json head = {{"menu", menu}, {"regime_id", p.regime_id}, {"convention", conv.name}, {"table", p.table}};
    if (lambda || rho) {
        if (!lambda || !rho) throw BadQuery("single-point coherence needs both lambda and rho");
        if (!(*lambda > 0.0) || !(*rho >= 0.0)) throw BadQuery("lambda must be positive and rho nonnegative");
        const CostRates costs = CostRates::from_ratios(*lambda, *rho);
        const CoherenceReport report = geometry::check_convention(p.table, conv, costs);
        head["lambda"] = *lambda;
        head["rho"] = *rho;
        head["report"] = report;
        head["rejection_band_nonempty"] = geometry::rejection_band_nonempty(costs);
        head["feasible"] = report.coherent && !report.reject_band_empty;
        return {200, document("coherence", std::move(head))};
    }
    std::vector<double> lambda_grid = list_param(params, "lambda_grid");
    std::vector<double> rho_grid = list_param(params, "rho_grid");
    const long lp = integer_param(params, "lambda_points").value_or(41);
    const long rp = integer_param(params, "rho_points").value_or(41);
    if (lp < 2 || rp < 2 || lp > 1001 || rp > 1001) throw BadQuery("grid point counts must lie in [2, 1001]");
    if (lambda_grid.empty()) lambda_grid = geometry::default_lambda_grid(static_cast<std::size_t>(lp));
    if (rho_grid.empty()) rho_grid = geometry::default_rho_grid(static_cast<std::size_t>(rp));
    for (double l : lambda_grid) {
        if (!(l > 0.0)) throw BadQuery("lambda_grid values must be positive");
    }
    for (double r : rho_grid) {
        if (!(r >= 0.0)) throw BadQuery("rho_grid values must be nonnegative");
    }
    head["envelope"] = geometry::pricing_envelope(p.table, conv, lambda_grid, rho_grid);
    return {200, document("coherence_grid", std::move(head))};
}

ApiResponse Service::get_job(const std::string& id) const { return {200, store_.get("jobs", id)}; }

ApiResponse Service::post_sweep(const std::string& body) {
    SweepJob job = parse_sweep_job(body);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        if (claimed_.count(job.id) || store_.exists("jobs", job.id) || store_.exists("menus", job.id)) {
            return error_response(409, "sweep job '" + job.id + "' already exists");
        }
        claimed_.insert(job.id);
        write_job(job.id, "queued", json::object());
        queue_.push_back(job);
    }
    cv_.notify_all();
    return {202, document("job", {{"job", job.id}, {"status", "queued"}})};
}

void Service::write_job(const std::string& id, const std::string& status, const json& extra) {
    json body = {{"job", id}, {"status", status}, {"menu", id}};
    for (const auto& [k, v] : extra.items()) body[k] = v;
    store_.put("jobs", id, document("job", std::move(body)));
}

void Service::worker_loop() {
    while (true) {
        SweepJob job;
        {
            std::unique_lock<std::mutex> lock(mutex_);
            cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
            if (stop_) return;
            job = std::move(queue_.front());
            queue_.pop_front();
            busy_ = true;
        }
        write_job(job.id, "running", json::object());
        try {
            const SweepOutcome out = run_sweep(store_, job);
            json failures = json::array();
            for (const auto& f : out.failures) failures.push_back(f.reason);
            const json summary = {{"points", out.raw_points},
                                  {"regimes", out.points.size()},
                                  {"front_size", out.front_size},
                                  {"failed_cells", failures}};
            if (out.total_failure) {
                write_job(job.id, "failed", {{"error", "every cell failed"}, {"summary", summary}});
            } else {
                write_job(job.id, "done", {{"summary", summary}});
            }
        } catch (const std::exception& e) {
            write_job(job.id, "failed", {{"error", e.what()}});
        }
        {
            std::lock_guard<std::mutex> lock(mutex_);
            busy_ = false;
        }
        idle_cv_.notify_all();
    }
}

void Service::wait_idle() {
    std::unique_lock<std::mutex> lock(mutex_);
    idle_cv_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

void mount(Service& service, httplib::Server& server) {
    auto reply = [](httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    server.Get(R"(/.*)", [&service, reply](const httplib::Request& req, httplib::Response& res) {
        QueryParams params;
        for (const auto& [k, v] : req.params) params.emplace(k, v);
        reply(res, service.get(req.path, params));
    });
    server.Post(R"(/.*)", [&service, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, service.post(req.path, req.body));
    });
}

void serve(const std::filesystem::path& store_root, const std::string& host, int port) {
    ArtifactStore store(store_root);
    Service service(store);
    httplib::Server server;
    mount(service, server);
    if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

} // namespace opcal::opsd
