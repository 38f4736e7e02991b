// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Line-protocol port backed by a script file. Reads one JSON request per
// line on stdin and answers {"type": <request type>, "content": ...}.
//   --role agent     script {"actions": [...]}; content is the next action
//   --role user      script {"utterances": [...]}; content is the next line
//   --role generate  canned outputs {stage: [...]}; content is the next output
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "polenv/error.hpp"
#include "polenv/ports.hpp"
#include "polenv/synthesis.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Scripted line-protocol port"};
    std::string role;
    std::string script_path;
    long exit_after = -1;
    app.add_option("--role", role, "agent | user | generate")
        ->required()
        ->check(CLI::IsMember({"agent", "user", "generate"}));
    app.add_option("script", script_path, "Script or canned-output JSON file")->required()->check(CLI::ExistingFile);
    app.add_option("--exit-after", exit_after, "Exit without answering after N responses");
    CLI11_PARSE(app, argc, argv);

    try {
        const auto script = polenv::load_canned_outputs(script_path);
        std::unique_ptr<polenv::ScriptedAgentPort> agent;
        std::unique_ptr<polenv::ScriptedUserPort> user;
        std::unique_ptr<polenv::StubGenerationPort> gen;
        if (role == "agent") agent = std::make_unique<polenv::ScriptedAgentPort>(script);
        if (role == "user") user = std::make_unique<polenv::ScriptedUserPort>(script);
        if (role == "generate") gen = std::make_unique<polenv::StubGenerationPort>(script);

        long answered = 0;
        std::string line;
        while (std::getline(std::cin, line)) {
            if (line.empty()) continue;
            if (exit_after >= 0 && answered >= exit_after) return 0;
            const auto req = polenv::json::parse(line);
            const auto type = req.value("type", std::string());
            polenv::json content;
            if (agent) {
                content = agent->next_action({}, 0).to_json();
            } else if (user) {
                polenv::UserView view;
                if (req.contains("limits")) view.limits = polenv::RolloutLimits::from_json(req["limits"]);
                content = user->next_utterance(view, 0);
            } else {
                content = gen->generate(req.value("stage", std::string()), req.value("context", polenv::json()), 0);
            }
            std::cout << polenv::json{{"type", type}, {"content", content}}.dump() << std::endl;
            ++answered;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "polenv-script-port: " << e.what() << "\n";
        return 1;
    }
}
