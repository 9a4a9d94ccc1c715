#pragma once

#include <string>

#include "mprl/trainer.hpp"

namespace mprl {

/// Overlay a plain-text key=value config file (keys named after the
/// TrainConfig fields; '#' starts a comment) onto base. Io error when
/// unreadable, Config error on unknown keys or bad values.
TrainConfig load_train_config(const std::string& path, TrainConfig base);

/// Entry point behind the mprl binary: subcommands gen-data, train,
/// eval, compare, oracle-check. Returns the process exit code: 0 on
/// success, 2 on usage errors, 1 otherwise.
int cli_main(int argc, char** argv);

}  // namespace mprl
