#include "microlti/config.hpp"
#include "microlti/service.hpp"
#include "microlti/simulation.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <cmath>
#include <fstream>
#include <iostream>

using namespace microlti;

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int)
{
    if (g_server) g_server->stop();
}

struct GlobalOptions {
    std::string config_file;
    std::string listen;
    std::string storage;
};

ServiceConfig load(const GlobalOptions& opts)
{
    ServiceConfig cfg = opts.config_file.empty() ? ServiceConfig{} : load_config_file(opts.config_file);
    apply_environment(cfg, microlti_environment());
    if (!opts.listen.empty()) cfg.listen = opts.listen;
    if (!opts.storage.empty()) cfg.storage_path = opts.storage;
    cfg.validate();
    return cfg;
}

int register_consumer(const ServiceConfig& cfg, const std::string& key, const std::string& secret,
                      const std::string& name)
{
    lti::ConsumerRegistry registry(cfg.consumers_path());
    auto c = registry.register_consumer(key, secret, name, system_now());
    std::cout << "registered consumer '" << c.consumer_key << "' (" << c.lms_name << ")\n"
              << "launch URLs: " << cfg.base_url() << "/lti/launch/<content-id>\n";
    return 0;
}

int import_content(const ServiceConfig& cfg, const std::string& file)
{
    std::ifstream in(file);
    if (!in) {
        std::cerr << "cannot read " << file << "\n";
        return 1;
    }
    content::ContentRepository repo(std::make_shared<content::FileDocumentStore>(cfg.content_path()));
    auto result = repo.import_ndjson(in);
    if (!result.rejected.empty()) {
        for (const auto& [line, reason] : result.rejected) std::cerr << file << ":" << line << ": " << reason << "\n";
        for (const auto& [line, report] : result.reports)
            std::cerr << file << ":" << line << ": " << content::to_json(report).dump() << "\n";
        std::cerr << "nothing imported\n";
        return 1;
    }
    for (const auto& id : result.imported) std::cout << "imported " << id << "\n";
    return 0;
}

int export_content(const ServiceConfig& cfg, const std::string& file)
{
    content::ContentRepository repo(std::make_shared<content::FileDocumentStore>(cfg.content_path()));
    if (file.empty() || file == "-") {
        repo.export_ndjson(std::cout);
        return 0;
    }
    std::ofstream out(file);
    if (!out) {
        std::cerr << "cannot write " << file << "\n";
        return 1;
    }
    repo.export_ndjson(out);
    return 0;
}

int serve(const ServiceConfig& cfg)
{
    const auto [host, port] = split_listen_address(cfg.listen);
    ToolProvider tool(cfg);
    httplib::Server server;
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
        std::cerr << req.method << " " << req.path << " " << res.status << "\n";
    });
    tool.mount(server);

    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "serving on " << cfg.listen << ", launch base " << cfg.base_url() << "/lti/launch/\n";
    if (!server.listen(host, port)) {
        std::cerr << "cannot listen on " << cfg.listen << "\n";
        return 1;
    }
    return 0;
}

std::string show(const std::optional<double>& score)
{
    return score ? lis::format_score(*score) : "(empty)";
}

int simulate(const std::string& storage, bool all_correct)
{
    std::filesystem::path root = storage;
    std::optional<std::filesystem::path> scratch;
    if (root.empty()) {
        scratch = std::filesystem::temp_directory_path() / ("microlti-sim-" + oauth::random_hex(6));
        root = *scratch;
    }
    int status = 1;
    {
        simulation::LoopbackDeployment d(root);
        std::cout << "tool provider  " << d.tool_url() << "\n"
                  << "simulated LMS  " << d.simulator_url() << "\n";

        auto launched = d.launch("oauth-basics");
        if (launched.status != 302) {
            std::cerr << "launch rejected (HTTP " << launched.status << "): " << launched.body;
        } else {
            const auto before = d.gradebook_score(launched.sourced_id);
            const auto fetched = d.fetch_content(launched.token);
            const auto submitted = d.submit(launched.token, simulation::demo_answers(all_correct));
            const auto after = d.gradebook_score(launched.sourced_id);
            const double expected = all_correct ? 1.0 : 0.75;

            std::cout << "launch         302, session " << launched.token.substr(0, 8) << "...\n"
                      << "content        HTTP " << fetched.status << "\n"
                      << "submit         HTTP " << submitted.status << " " << submitted.body << "\n"
                      << "gradebook      " << launched.sourced_id << ": " << show(before) << " -> " << show(after)
                      << " (expected " << lis::format_score(expected) << ")\n";
            if (fetched.status == 200 && submitted.status == 200 && after && std::abs(*after - expected) <= 1e-4) {
                std::cout << "OK\n";
                status = 0;
            } else {
                std::cerr << "MISMATCH\n";
            }
        }
    }
    if (scratch) std::filesystem::remove_all(*scratch);
    return status;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Micro-content LTI tool provider"};
    app.require_subcommand(1);

    GlobalOptions opts;
    app.add_option("-c,--config", opts.config_file, "Configuration file (key = value lines)")->check(CLI::ExistingFile);
    app.add_option("--listen", opts.listen, "host:port to listen on");
    app.add_option("--storage", opts.storage, "Storage directory");

    std::string key, secret, name;
    auto* reg = app.add_subcommand("register-consumer", "Register an LMS consumer key and shared secret");
    reg->add_option("key", key)->required();
    reg->add_option("secret", secret)->required();
    reg->add_option("name", name, "LMS display name")->required();

    std::string import_file;
    auto* imp = app.add_subcommand("import-content", "Validate and load an NDJSON file (all or nothing)");
    imp->add_option("file", import_file)->required()->check(CLI::ExistingFile);

    std::string export_file;
    auto* exp = app.add_subcommand("export-content", "Write every stored unit as NDJSON");
    exp->add_option("file", export_file, "Output file (default stdout)");

    auto* srv = app.add_subcommand("serve", "Run the tool provider");

    std::string sim_storage;
    bool all_correct = false;
    auto* sim = app.add_subcommand("simulate", "Run one launch, submit and passback loop against a simulated LMS");
    sim->add_option("--keep-storage", sim_storage, "Use and keep this storage directory");
    sim->add_flag("--all-correct", all_correct, "Submit every answer correctly (expect 1)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) return simulate(sim_storage, all_correct);
        const ServiceConfig cfg = load(opts);
        if (*reg) return register_consumer(cfg, key, secret, name);
        if (*imp) return import_content(cfg, import_file);
        if (*exp) return export_content(cfg, export_file);
        if (*srv) return serve(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
