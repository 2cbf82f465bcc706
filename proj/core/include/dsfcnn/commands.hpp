#pragma once

#include <string>

namespace dsf {

// Operator entry points behind the CLI. Each returns a process exit code:
// 0 ok, 1 usage, 2 config, 3 data, 4 numeric failure.

int cmd_train(const std::string& config_path);
int cmd_eval(const std::string& config_path, const std::string& ckpt_path);
int cmd_equiv_report(const std::string& config_path,
                     const std::string& ckpt_path, int image_index);
int cmd_export_filters(const std::string& config_path,
                       const std::string& ckpt_path,  // may be empty
                       const std::string& out_dir);
int cmd_grad_check(const std::string& only_op);  // empty = all ops

}  // namespace dsf
