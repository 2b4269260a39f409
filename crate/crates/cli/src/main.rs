fn main() {
    std::process::exit(sensor_entropy_cli::run(std::env::args_os()));
}
