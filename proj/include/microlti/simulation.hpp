#pragma once

#include "microlti/service.hpp"
#include "microlti/tc_simulator.hpp"

#include <filesystem>
#include <memory>

namespace microlti::simulation {

/// Four-question unit used by the demo loop and the tests.
content::MicroContent demo_content();

/// {"answers": [...]} for demo_content(): all correct, or the last one wrong.
nlohmann::json demo_answers(bool all_correct);

struct LaunchedSession {
    std::string token;
    std::string sourced_id;
    int status = 0;         // HTTP status of the launch POST
    std::string location;   // redirect target on success
    std::string body;
};

struct HttpResult {
    int status = 0;
    std::string body;
};

/**
 * Tool provider and simulated LMS on loopback ports, wired to each other,
 * with storage under `storage_root`. All traffic goes over real HTTP.
 */
class LoopbackDeployment {
public:
    static constexpr std::string_view kConsumerKey = "sim-lms";
    static constexpr std::string_view kSecret = "sim-shared-secret";
    static constexpr std::string_view kAuthoringToken = "sim-author-token";

    explicit LoopbackDeployment(std::filesystem::path storage_root, Clock clock = system_now);
    ~LoopbackDeployment();

    ToolProvider& tool() { return *tool_; }
    sim::ToolConsumerSimulator& simulator() { return *simulator_; }
    std::string tool_url() const { return tool_server_->url(); }
    std::string simulator_url() const { return sim_server_->url(); }

    /// Stops the LMS side; later passbacks fail with a transport error.
    void stop_simulator() { sim_server_->stop(); }

    /// Fetches a signed launch form from the simulator and posts it to the tool.
    LaunchedSession launch(const std::string& content_id, const std::string& user_id = "student-1");

    HttpResult fetch_content(const std::string& token);
    HttpResult submit(const std::string& token, const nlohmann::json& answers);
    /// nullopt while the gradebook cell is empty.
    std::optional<double> gradebook_score(const std::string& sourced_id);

private:
    Clock clock_;
    std::unique_ptr<BackgroundServer> tool_server_;
    std::unique_ptr<BackgroundServer> sim_server_;
    std::unique_ptr<ToolProvider> tool_;
    std::unique_ptr<sim::ToolConsumerSimulator> simulator_;
};

}  // namespace microlti::simulation
