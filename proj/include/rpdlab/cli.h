#ifndef RPDLAB_CLI_H_
#define RPDLAB_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace rpdlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;

inline constexpr const char* kVersion = "0.1.0";

// Entry point shared by the rpdlab binary and the tests. args[0] is the
// program name. Verbs: predict, simulate, analyze, cluster-chats.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rpdlab

#endif  // RPDLAB_CLI_H_
