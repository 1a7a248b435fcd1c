fn main() {
    std::process::exit(fall_cascade::run());
}
