use std::path::Path;
use std::process::Command;

// The generated header must compile as both C and C++.
#[test]
fn header_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/transonic.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["transonic_config_parse", "transonic_last_error_message", "TRANSONIC_STATUS_CERTIFICATE = 4"] {
        assert!(text.contains(sym), "{sym}");
    }
    let src = std::env::temp_dir().join(format!("transonic-header-{}.c", std::process::id()));
    std::fs::write(
        &src,
        "#include \"transonic.h\"\nint main(void) {\n  TransonicConfig *cfg = 0;\n  \
         TransonicStatus s = transonic_config_parse(\"\", &cfg);\n  transonic_config_free(cfg);\n  return (int)s;\n}\n",
    )
    .unwrap();
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(out) = Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(dir.join("include"))
            .arg(&src)
            .output()
        else {
            eprintln!("{cc} not available, skipping");
            continue;
        };
        assert!(out.status.success(), "{cc}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
