fn main() {
    gola_core::cli::main()
}
