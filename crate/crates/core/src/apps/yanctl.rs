//! Small admin shell mirroring store operations one to one.
//!
//! ```text
//! yanctl ls [-l] [path] | cat <path> | write <path> <value>... | mkdir <path>
//!        ln <target> <path> | readlink <path> | rm [-r] <path> | mv <from> <to>
//!        stat <path> | commit <flow> | watch <path> [count] [timeout_ms]
//! ```

use std::time::{Duration, Instant};

use crate::api::FsApi;
use crate::error::FsError;
use crate::store::NodeKind;

use super::Outcome;

pub const EXIT_USAGE: i32 = 64;

const USAGE: &str = "usage: yanctl ls|cat|write|mkdir|ln|readlink|rm|mv|stat|commit|watch ...";

/// Distinct exit status per error kind.
pub fn exit_code(e: &FsError) -> i32 {
    match e {
        FsError::NotFound(_) => 10,
        FsError::NotADirectory(_) => 11,
        FsError::IsADirectory(_) => 12,
        FsError::AlreadyExists(_) => 13,
        FsError::InvalidName(_) => 14,
        FsError::InvalidArgument(_) => 15,
        FsError::PermissionDenied(_) => 16,
        FsError::DirectoryNotEmpty(_) => 17,
        FsError::NotALink(_) => 18,
        FsError::DanglingLink(_) => 19,
        FsError::LoopDetected(_) => 20,
        FsError::MalformedSnapshot { .. } => 21,
        FsError::NotASchemaPoint(_) => 22,
        FsError::UnknownField(_) => 23,
        FsError::ParseError { .. } => 24,
        FsError::RangeError { .. } => 25,
        FsError::ValidationFailed { .. } => 26,
        FsError::Unreachable(_) => 27,
        FsError::Protocol(_) => 28,
    }
}

fn kind_char(k: NodeKind) -> char {
    match k {
        NodeKind::Directory => 'd',
        NodeKind::File => '-',
        NodeKind::Symlink => 'l',
    }
}

fn ls(fs: &dyn FsApi, path: &str, long: bool) -> Result<String, FsError> {
    let mut names = fs.list(path)?;
    names.sort();
    let mut out = String::new();
    for n in names {
        if long {
            let p = format!("{}/{n}", path.trim_end_matches('/'));
            let i = fs.stat(&p, false)?;
            let tail = match i.kind {
                NodeKind::Symlink => format!(" -> {}", fs.readlink(&p)?),
                _ => String::new(),
            };
            out.push_str(&format!(
                "{}{:03o}\t{}\t{}\t{n}{tail}\n",
                kind_char(i.kind),
                i.meta.mode,
                i.size,
                i.meta.mtime
            ));
        } else {
            out.push_str(&n);
            out.push('\n');
        }
    }
    Ok(out)
}

fn watch(fs: &dyn FsApi, path: &str, count: usize, timeout: Duration) -> Result<String, FsError> {
    let mut w = fs.watch(path, true, 65_536)?;
    let deadline = Instant::now() + timeout;
    let mut out = String::new();
    let mut n = 0;
    while n < count {
        let now = Instant::now();
        if now >= deadline {
            break;
        }
        let Some(ev) = w.next_event(deadline - now) else {
            break;
        };
        match &ev.old_path {
            Some(old) => out.push_str(&format!("{}\t{}\t{old}\n", ev.kind.as_str(), ev.path)),
            None => out.push_str(&format!("{}\t{}\n", ev.kind.as_str(), ev.path)),
        }
        n += 1;
    }
    Ok(out)
}

pub fn yanctl(fs: &dyn FsApi, args: &[String]) -> Outcome {
    let a: Vec<&str> = args.iter().map(String::as_str).collect();
    let r: Result<String, FsError> = match a.as_slice() {
        ["ls"] => ls(fs, "/", false),
        ["ls", "-l"] => ls(fs, "/", true),
        ["ls", "-l", p] => ls(fs, p, true),
        ["ls", p] => ls(fs, p, false),
        ["cat", p] => fs.read(p).map(|b| String::from_utf8_lossy(&b).into_owned()),
        ["write", p, value @ ..] => fs.write(p, value.join(" ").as_bytes()).map(|_| String::new()),
        ["mkdir", p] => fs.mkdir(p).map(|_| String::new()),
        ["ln", target, p] => fs.symlink(p, target).map(|_| String::new()),
        ["readlink", p] => fs.readlink(p).map(|t| format!("{t}\n")),
        ["rm", "-r", p] => fs.remove(p, true).map(|_| String::new()),
        ["rm", p] => fs.remove(p, false).map(|_| String::new()),
        ["mv", from, to] => fs.rename(from, to).map(|_| String::new()),
        ["stat", p] => fs.stat(p, false).map(|i| {
            format!(
                "kind\t{}\nmode\t{:03o}\nsize\t{}\nmtime\t{}\n",
                kind_char(i.kind),
                i.meta.mode,
                i.size,
                i.meta.mtime
            )
        }),
        ["commit", p] => fs.commit_flow(p).map(|v| format!("{v}\n")),
        ["watch", p, rest @ ..] => {
            let count = rest.first().and_then(|c| c.parse().ok()).unwrap_or(usize::MAX);
            let ms = rest.get(1).and_then(|t| t.parse().ok()).unwrap_or(86_400_000);
            watch(fs, p, count, Duration::from_millis(ms))
        }
        _ => return Outcome::fail(EXIT_USAGE, format!("{USAGE}\n")),
    };
    match r {
        Ok(out) => Outcome::ok(out),
        Err(e) => Outcome::fail(exit_code(&e), format!("yanctl: {e}\n")),
    }
}
