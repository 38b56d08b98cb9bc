#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "oemstream/memory.hpp"
#include "oemstream/pipeline.hpp"

namespace httplib {
class Server;
}

namespace oem {

/// HTTP API for the operator console.
///
///   GET  /memory/stream  SSE feed of memory entries, one event per entry with
///                        `id: k`. Resumes after the Last-Event-ID header or
///                        from `?from=k`. Ends with an `end` event once the
///                        descriptor has finished and every entry was sent.
///   POST /query          Query JSON -> AnswerRecord JSON.
///   GET  /status         backlog depth, budgets and violation counts.
class ConsoleServer {
public:
    ConsoleServer(Pipeline& pipeline, TextualMemory& memory);
    ~ConsoleServer();

    ConsoleServer(const ConsoleServer&) = delete;
    ConsoleServer& operator=(const ConsoleServer&) = delete;

    // Binds and returns the port; port 0 picks a free one. Throws ConnectivityError.
    int bind(const std::string& host, int port);
    // Serves until stop(). Requires bind().
    void listen();
    // bind + listen on a background thread; returns once accepting.
    int start(const std::string& host, int port);
    void stop();

private:
    void install_routes();

    Pipeline& pipeline_;
    TextualMemory& memory_;
    std::unique_ptr<httplib::Server> server_;
    std::atomic<bool> stopping_{false};
    std::thread thread_;
};

}  // namespace oem
