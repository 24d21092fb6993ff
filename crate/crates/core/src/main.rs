fn main() {
    std::process::exit(flowdeblur::cli::run());
}
