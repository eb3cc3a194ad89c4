fn main() {
    chromaline::cli::main();
}
