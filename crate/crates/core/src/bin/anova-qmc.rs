fn main() {
    std::process::exit(anova_qmc::cli::main_with_args(std::env::args_os()));
}
