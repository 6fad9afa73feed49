fn main() {
    std::process::exit(relaymesh::cli::cli_main(std::env::args_os()));
}
