use std::env;
use std::path::PathBuf;

fn main() {
    let dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = cbindgen::Config::from_file(dir.join("cbindgen.toml"))
        .expect("cbindgen.toml should parse");
    // Regenerating is best effort: a checked-in header is still usable when
    // cbindgen cannot parse something (e.g. newer syntax), so warn instead of failing.
    match cbindgen::Builder::new()
        .with_crate(&dir)
        .with_config(config)
        .generate()
    {
        Ok(bindings) => {
            bindings.write_to_file(dir.join("include").join("pursuit.h"));
        }
        Err(e) => println!("cargo:warning=header not regenerated: {e}"),
    }
}
