#include "oemstream/server.hpp"

#include <chrono>

#include <fmt/format.h>
#include <httplib.h>

#include "oemstream/config.hpp"
#include "oemstream/error.hpp"
#include "oemstream/sse.hpp"

namespace oem {

namespace {

void reply_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

std::size_t first_index(const httplib::Request& req) {
    // Both forms name clip indices; entries are stored 0-based.
    try {
        if (req.has_header("Last-Event-ID")) {
            const auto id = std::stoull(req.get_header_value("Last-Event-ID"));
            return static_cast<std::size_t>(id);
        }
        if (req.has_param("from")) {
            const auto k = std::stoull(req.get_param_value("from"));
            return k > 0 ? static_cast<std::size_t>(k - 1) : 0;
        }
    } catch (const std::exception&) {
        throw InputError("invalid resume position");
    }
    return 0;
}

}  // namespace

ConsoleServer::ConsoleServer(Pipeline& pipeline, TextualMemory& memory)
    : pipeline_(pipeline), memory_(memory), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

ConsoleServer::~ConsoleServer() { stop(); }

void ConsoleServer::install_routes() {
    server_->set_default_headers({{"Access-Control-Allow-Origin", "*"}});

    server_->Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID");
        res.status = 204;
    });

    server_->Get("/status", [this](const httplib::Request&, httplib::Response& res) {
        auto body = to_json(pipeline_.status(), pipeline_.options());
        body["ttft_definition"] = "request dispatch to first streamed token";
        reply_json(res, 200, body);
    });

    server_->Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
        Query q;
        try {
            q = query_from_json(nlohmann::json::parse(req.body));
        } catch (const std::exception& ex) {
            reply_json(res, 400, {{"error", ex.what()}});
            return;
        }
        try {
            auto future = pipeline_.submit(std::move(q));
            nlohmann::json body = future.get();
            body["t_r"] = pipeline_.options().budget.t_r;
            reply_json(res, 200, body);
        } catch (const InputError& ex) {
            reply_json(res, 400, {{"error", ex.what()}});
        } catch (const ConfigError& ex) {
            reply_json(res, 503, {{"error", ex.what()}});
        } catch (const std::exception& ex) {
            reply_json(res, 409, {{"error", ex.what()}});
        }
    });

    server_->Get("/memory/stream", [this](const httplib::Request& req, httplib::Response& res) {
        std::size_t next;
        try {
            next = first_index(req);
        } catch (const InputError& ex) {
            reply_json(res, 400, {{"error", ex.what()}});
            return;
        }
        res.set_header("Cache-Control", "no-cache");
        auto cursor = std::make_shared<std::size_t>(next);
        res.set_chunked_content_provider(
            "text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
                if (stopping_) return false;
                const bool done = pipeline_.descriptor_done();
                MemoryView view = memory_.snapshot();
                if (view.size() <= *cursor && !done) {
                    memory_.wait_for_growth(*cursor + 1, std::chrono::milliseconds(200));
                    view = memory_.snapshot();
                    if (view.size() <= *cursor) {
                        const std::string ping = ": keep-alive\n\n";
                        return sink.write(ping.data(), ping.size());
                    }
                }
                for (; *cursor < view.size(); ++*cursor) {
                    const MemoryEntry& e = view[*cursor];
                    nlohmann::json data = e;
                    const auto text = format_sse({"entry", data.dump(), std::to_string(e.k)});
                    if (!sink.write(text.data(), text.size())) return false;
                }
                if (done && *cursor >= memory_.size()) {
                    const auto end = format_sse({"end", "{}", std::nullopt});
                    sink.write(end.data(), end.size());
                    sink.done();
                }
                return true;
            });
    });
}

int ConsoleServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = server_->bind_to_any_port(host);
        if (bound < 0) throw ConnectivityError(host, "cannot bind to any port");
        return bound;
    }
    if (!server_->bind_to_port(host, port))
        throw ConnectivityError(fmt::format("{}:{}", host, port), "cannot bind");
    return port;
}

void ConsoleServer::listen() { server_->listen_after_bind(); }

int ConsoleServer::start(const std::string& host, int port) {
    const int bound = bind(host, port);
    thread_ = std::thread([this] { listen(); });
    server_->wait_until_ready();
    return bound;
}

void ConsoleServer::stop() {
    stopping_ = true;
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace oem
