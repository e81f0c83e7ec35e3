// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(fbra_core::cli::main_from(std::env::args_os()));
}
