#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace g2gan {

// Exit codes shared by every command.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitUsage = 2,
  kExitNumerics = 3,
};

// Each command takes the arguments after its name. `--help` prints usage and
// returns 0; flag errors return 2 before anything touches the filesystem.
int cmd_synth(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_train(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_translate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_evaluate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_capacity(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Dispatches `args[0]` (the command name) to its handler.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace g2gan
