#pragma once

#include "opcal/commands.hpp"
#include "opcal/store.hpp"

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace opcal::opsd {

struct ApiResponse {
    int status = 200;
    json body;
};

using QueryParams = std::map<std::string, std::string>;

/// Request router behind the HTTP surface. GET handlers read only the store and the
/// query; POST /sweeps hands the spec to a single worker thread so sweeps never
/// write concurrently.
class Service {
public:
    explicit Service(ArtifactStore& store);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    ApiResponse get(const std::string& path, const QueryParams& params) const;
    ApiResponse post(const std::string& path, const std::string& body);

    /// Blocks until the sweep queue is empty and the worker is idle.
    void wait_idle();

private:
    ApiResponse get_datasets() const;
    ApiResponse get_menu(const std::string& id) const;
    ApiResponse get_front(const std::string& id, const QueryParams& params) const;
    ApiResponse get_envelopes(const std::string& menu, const std::string& regime, const QueryParams& params) const;
    ApiResponse get_coherence(const std::string& menu, const std::string& regime, const QueryParams& params) const;
    ApiResponse get_job(const std::string& id) const;
    ApiResponse post_sweep(const std::string& body);

    void worker_loop();
    void write_job(const std::string& id, const std::string& status, const json& extra);

    ArtifactStore& store_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    std::deque<SweepJob> queue_;
    std::set<std::string> claimed_;
    bool busy_ = false;
    bool stop_ = false;
    std::thread worker_;
};

/// Registers every route of `service` on `server`.
void mount(Service& service, httplib::Server& server);

/// Blocking: serves the store on host:port until the process is stopped.
void serve(const std::filesystem::path& store_root, const std::string& host, int port);

} // namespace opcal::opsd
