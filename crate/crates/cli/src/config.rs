//! `--config FILE` support: the file's `key = value` lines become flags
//! spliced in right after the subcommand, so explicit flags override them.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;
use crate::CliError;

/// Removes `--config FILE` / `--config=FILE` from `argv` and expands the file.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let path = it
                .next()
                .ok_or_else(|| CliError::Usage("--config needs a file".into()))?;
            config = Some(path);
        } else if let Some(p) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            config = Some(p.into());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let Some(pos) = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')) else {
        return Err(CliError::Usage("--config needs a subcommand".into()));
    };
    let pos = pos + 1;
    let sub = rest[pos].to_string_lossy().into_owned();
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Runtime(format!("cannot read config {}: {e}", Path::new(&path).display())))?;
    let flags = to_flags(&sub, &text)?;
    rest.splice(pos + 1..pos + 1, flags);
    Ok(rest)
}

fn to_flags(sub: &str, text: &str) -> Result<Vec<OsString>, CliError> {
    let cmd = Cli::command();
    let sc = cmd
        .find_subcommand(sub)
        .ok_or_else(|| CliError::Usage(format!("unknown subcommand {sub:?}")))?;
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| CliError::Usage(format!("config line {}: {msg}", n + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key = value, got {line:?}")))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let arg = sc
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && a.get_id() != "config")
            .ok_or_else(|| bad(format!("unknown key {key:?} for {sub}")))?;
        if arg.get_action().takes_values() {
            out.push(format!("--{key}").into());
            out.push(value.into());
        } else {
            match value {
                "true" => out.push(format!("--{key}").into()),
                "false" => {}
                _ => return Err(bad(format!("{key} takes true or false, got {value:?}"))),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn lines_become_flags() {
        let f = to_flags("simulate", "# comment\nmu = 1,2\n\nt_max=3 # trailing\n").unwrap();
        assert_eq!(f, os(&["--mu", "1,2", "--t-max", "3"]));
        assert_eq!(to_flags("thresholds", "no-alpha1 = true\njson = false").unwrap(), os(&["--no-alpha1"]));
    }

    #[test]
    fn unknown_keys_and_bad_lines_rejected() {
        assert!(matches!(to_flags("simulate", "bogus = 1"), Err(CliError::Usage(_))));
        assert!(matches!(to_flags("thresholds", "alpha = 1"), Err(CliError::Usage(_))));
        assert!(matches!(to_flags("simulate", "mu 1,2"), Err(CliError::Usage(_))));
        assert!(matches!(to_flags("thresholds", "json = yes"), Err(CliError::Usage(_))));
        assert!(matches!(to_flags("simulate", "config = x"), Err(CliError::Usage(_))));
    }

    #[test]
    fn no_config_passes_through() {
        let argv = os(&["samdiag", "thresholds", "--rho", "2"]);
        assert_eq!(expand(argv.clone()).unwrap(), argv);
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "rho = 3\n").unwrap();
        let argv = os(&["samdiag", "--config", p.to_str().unwrap(), "thresholds", "--rho", "2"]);
        assert_eq!(
            expand(argv).unwrap(),
            os(&["samdiag", "thresholds", "--rho", "3", "--rho", "2"])
        );
    }
}
