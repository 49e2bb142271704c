#pragma once

#include "relgraph/config.hpp"
#include "relgraph/provider.hpp"
#include "relgraph/retrieval.hpp"
#include "relgraph/session.hpp"

#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace relgraph {

/// HTTP front end over a SessionStore. `provider` may be null, in which case
/// extraction and auto-resolution answer 503.
class Service {
public:
    Service(AppConfig config, std::shared_ptr<Provider> provider,
            std::shared_ptr<Embedder> embedder);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds the configured host and port (port 0 picks a free one) and
    /// returns the bound port.
    int bind();
    /// Serves until stop(). Call bind() first.
    void run();
    void start();  // bind + run on a background thread
    void stop();

    int port() const noexcept { return port_; }
    SessionStore& store() noexcept { return *store_; }

private:
    void routes();

    AppConfig config_;
    std::shared_ptr<Provider> provider_;
    std::shared_ptr<Embedder> embedder_;
    std::unique_ptr<SessionStore> store_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace relgraph
