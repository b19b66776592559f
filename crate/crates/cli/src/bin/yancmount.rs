//! Exposes the store through FUSE so ordinary tools work on it.
//!
//! Calls map one to one onto store operations. Writes are buffered per open
//! handle and applied whole on flush, since store files have no offsets.

use std::collections::HashMap;
use std::ffi::OsStr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::Parser;
use fuser::{
    Config, Errno, FileAttr, FileHandle, FileType, Filesystem, FopenFlags, Generation, INodeNo, LockOwner, MountOption, OpenFlags,
    RenameFlags, ReplyAttr, ReplyCreate, ReplyData, ReplyDirectory, ReplyEmpty, ReplyEntry, ReplyOpen, ReplyWrite, Request, TimeOrNow,
    WriteFlags,
};
use yanc_cli::{init_logging, StoreArgs};
use yanc_core::store::{NodeInfo, NodeKind};
use yanc_core::{FsApi, FsError};

const TTL: Duration = Duration::ZERO;

#[derive(Parser)]
#[command(about = "Mount the network file tree")]
struct Cli {
    #[arg(long, default_value = "/net")]
    mountpoint: PathBuf,
    #[command(flatten)]
    store: StoreArgs,
    #[arg(long)]
    read_only: bool,
}

fn errno(e: &FsError) -> Errno {
    let code = match e {
        FsError::NotFound(_) | FsError::DanglingLink(_) => libc::ENOENT,
        FsError::PermissionDenied(_) => libc::EACCES,
        FsError::DirectoryNotEmpty(_) => libc::ENOTEMPTY,
        FsError::AlreadyExists(_) => libc::EEXIST,
        FsError::NotADirectory(_) => libc::ENOTDIR,
        FsError::IsADirectory(_) => libc::EISDIR,
        FsError::LoopDetected(_) => libc::ELOOP,
        FsError::Unreachable(_) | FsError::Protocol(_) => libc::EIO,
        _ => libc::EINVAL,
    };
    Errno::from_i32(code)
}

struct Handle {
    path: String,
    buf: Option<Vec<u8>>,
    dirty: bool,
}

#[derive(Default)]
struct Inodes {
    by_path: HashMap<String, u64>,
    by_ino: HashMap<u64, String>,
}

struct Mount {
    fs: Arc<dyn FsApi>,
    read_only: bool,
    root: String,
    inodes: Mutex<Inodes>,
    handles: Mutex<HashMap<u64, Handle>>,
    next_fh: AtomicU64,
    uid: u32,
    gid: u32,
}

impl Mount {
    fn ino(&self, path: &str) -> INodeNo {
        let mut t = self.inodes.lock().expect("inode table");
        if let Some(&i) = t.by_path.get(path) {
            return INodeNo(i);
        }
        let i = if path == self.root { 1 } else { t.by_ino.len() as u64 + 2 };
        t.by_path.insert(path.to_string(), i);
        t.by_ino.insert(i, path.to_string());
        INodeNo(i)
    }

    fn path(&self, ino: INodeNo) -> Option<String> {
        if ino == INodeNo::ROOT {
            return Some(self.root.clone());
        }
        self.inodes.lock().expect("inode table").by_ino.get(&ino.0).cloned()
    }

    fn child(&self, parent: INodeNo, name: &OsStr) -> Option<String> {
        let p = self.path(parent)?;
        let name = name.to_str()?;
        Some(if p == "/" { format!("/{name}") } else { format!("{p}/{name}") })
    }

    fn attr_of(&self, path: &str, info: &NodeInfo) -> FileAttr {
        let t = UNIX_EPOCH + Duration::from_secs(info.meta.mtime);
        let kind = match info.kind {
            NodeKind::Directory => FileType::Directory,
            NodeKind::File => FileType::RegularFile,
            NodeKind::Symlink => FileType::Symlink,
        };
        FileAttr {
            ino: self.ino(path),
            size: info.size,
            blocks: info.size.div_ceil(512),
            atime: t,
            mtime: t,
            ctime: t,
            crtime: t,
            kind,
            perm: (info.meta.mode & 0o7777) as u16,
            nlink: if kind == FileType::Directory { 2 } else { 1 },
            uid: self.uid,
            gid: self.gid,
            rdev: 0,
            blksize: 4096,
            flags: 0,
        }
    }

    /// Attributes of a file that so far exists only as an open buffer.
    fn pending_attr(&self, path: &str) -> Option<FileAttr> {
        let h = self.handles.lock().expect("handles");
        let buf = h.values().find(|h| h.path == path && h.dirty)?.buf.as_ref()?;
        let now = SystemTime::now();
        Some(FileAttr {
            ino: self.ino(path),
            size: buf.len() as u64,
            blocks: 0,
            atime: now,
            mtime: now,
            ctime: now,
            crtime: now,
            kind: FileType::RegularFile,
            perm: 0o644,
            nlink: 1,
            uid: self.uid,
            gid: self.gid,
            rdev: 0,
            blksize: 4096,
            flags: 0,
        })
    }

    fn attr(&self, path: &str) -> Result<FileAttr, Errno> {
        match self.fs.stat(path, false) {
            Ok(i) => Ok(self.attr_of(path, &i)),
            Err(e) => self.pending_attr(path).ok_or_else(|| errno(&e)),
        }
    }

    fn open_handle(&self, path: String, truncate: bool) -> FileHandle {
        let fh = self.next_fh.fetch_add(1, Ordering::Relaxed);
        let h = Handle {
            path,
            buf: truncate.then(Vec::new),
            dirty: truncate,
        };
        self.handles.lock().expect("handles").insert(fh, h);
        FileHandle(fh)
    }

    fn flush_handle(&self, fh: FileHandle) -> Result<(), Errno> {
        let mut hs = self.handles.lock().expect("handles");
        let Some(h) = hs.get_mut(&fh.0) else { return Ok(()) };
        if !h.dirty {
            return Ok(());
        }
        h.dirty = false;
        let buf = h.buf.clone().unwrap_or_default();
        let path = h.path.clone();
        drop(hs);
        self.fs.write(&path, &buf).map_err(|e| errno(&e))
    }

    fn guard(&self) -> Result<(), Errno> {
        if self.read_only {
            Err(Errno::from_i32(libc::EROFS))
        } else {
            Ok(())
        }
    }
}

macro_rules! tri {
    ($reply:expr, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return $reply.error(err),
        }
    };
}

fn noent() -> Errno {
    Errno::from_i32(libc::ENOENT)
}

impl Filesystem for Mount {
    fn lookup(&self, _req: &Request, parent: INodeNo, name: &OsStr, reply: ReplyEntry) {
        let p = tri!(reply, self.child(parent, name).ok_or_else(noent));
        let a = tri!(reply, self.attr(&p));
        reply.entry(&TTL, &a, Generation(0));
    }

    fn getattr(&self, _req: &Request, ino: INodeNo, _fh: Option<FileHandle>, reply: ReplyAttr) {
        let p = tri!(reply, self.path(ino).ok_or_else(noent));
        let a = tri!(reply, self.attr(&p));
        reply.attr(&TTL, &a);
    }

    fn setattr(
        &self,
        _req: &Request,
        ino: INodeNo,
        mode: Option<u32>,
        _uid: Option<u32>,
        _gid: Option<u32>,
        size: Option<u64>,
        _atime: Option<TimeOrNow>,
        _mtime: Option<TimeOrNow>,
        _ctime: Option<SystemTime>,
        fh: Option<FileHandle>,
        _crtime: Option<SystemTime>,
        _chgtime: Option<SystemTime>,
        _bkuptime: Option<SystemTime>,
        _flags: Option<fuser::BsdFileFlags>,
        reply: ReplyAttr,
    ) {
        let p = tri!(reply, self.path(ino).ok_or_else(noent));
        if mode.is_some() || size.is_some() {
            tri!(reply, self.guard());
        }
        if let Some(m) = mode {
            tri!(reply, self.fs.set_mode(&p, m & 0o7777).map_err(|e| errno(&e)));
        }
        if let Some(n) = size {
            let mut hs = self.handles.lock().expect("handles");
            let key = fh
                .map(|f| f.0)
                .filter(|k| hs.contains_key(k))
                .or_else(|| hs.iter().find(|(_, h)| h.path == p).map(|(k, _)| *k));
            match key.and_then(|k| hs.get_mut(&k)) {
                Some(h) => {
                    let mut b = h.buf.take().unwrap_or_else(|| self.fs.read(&p).unwrap_or_default());
                    b.resize(n as usize, 0);
                    h.buf = Some(b);
                    h.dirty = true;
                }
                None => {
                    drop(hs);
                    let mut b = self.fs.read(&p).unwrap_or_default();
                    b.resize(n as usize, 0);
                    tri!(reply, self.fs.write(&p, &b).map_err(|e| errno(&e)));
                }
            }
        }
        let a = tri!(reply, self.attr(&p));
        reply.attr(&TTL, &a);
    }

    fn readlink(&self, _req: &Request, ino: INodeNo, reply: ReplyData) {
        let p = tri!(reply, self.path(ino).ok_or_else(noent));
        let t = tri!(reply, self.fs.readlink(&p).map_err(|e| errno(&e)));
        reply.data(t.as_bytes());
    }

    fn mkdir(&self, _req: &Request, parent: INodeNo, name: &OsStr, _mode: u32, _umask: u32, reply: ReplyEntry) {
        tri!(reply, self.guard());
        let p = tri!(reply, self.child(parent, name).ok_or_else(noent));
        tri!(reply, self.fs.mkdir(&p).map_err(|e| errno(&e)));
        let a = tri!(reply, self.attr(&p));
        reply.entry(&TTL, &a, Generation(0));
    }

    fn unlink(&self, _req: &Request, parent: INodeNo, name: &OsStr, reply: ReplyEmpty) {
        tri!(reply, self.guard());
        let p = tri!(reply, self.child(parent, name).ok_or_else(noent));
        tri!(reply, self.fs.remove(&p, false).map_err(|e| errno(&e)));
        reply.ok();
    }

    fn rmdir(&self, _req: &Request, parent: INodeNo, name: &OsStr, reply: ReplyEmpty) {
        tri!(reply, self.guard());
        let p = tri!(reply, self.child(parent, name).ok_or_else(noent));
        tri!(reply, self.fs.remove(&p, false).map_err(|e| errno(&e)));
        reply.ok();
    }

    fn symlink(&self, _req: &Request, parent: INodeNo, link_name: &OsStr, target: &Path, reply: ReplyEntry) {
        tri!(reply, self.guard());
        let p = tri!(reply, self.child(parent, link_name).ok_or_else(noent));
        let t = tri!(reply, target.to_str().ok_or(Errno::from_i32(libc::EINVAL)));
        tri!(reply, self.fs.symlink(&p, t).map_err(|e| errno(&e)));
        let a = tri!(reply, self.attr(&p));
        reply.entry(&TTL, &a, Generation(0));
    }

    fn rename(
        &self,
        _req: &Request,
        parent: INodeNo,
        name: &OsStr,
        newparent: INodeNo,
        newname: &OsStr,
        _flags: RenameFlags,
        reply: ReplyEmpty,
    ) {
        tri!(reply, self.guard());
        let from = tri!(reply, self.child(parent, name).ok_or_else(noent));
        let to = tri!(reply, self.child(newparent, newname).ok_or_else(noent));
        tri!(reply, self.fs.rename(&from, &to).map_err(|e| errno(&e)));
        let mut t = self.inodes.lock().expect("inode table");
        if let Some(i) = t.by_path.remove(&from) {
            t.by_path.insert(to.clone(), i);
            t.by_ino.insert(i, to);
        }
        reply.ok();
    }

    fn open(&self, _req: &Request, ino: INodeNo, flags: OpenFlags, reply: ReplyOpen) {
        let p = tri!(reply, self.path(ino).ok_or_else(noent));
        let truncate = flags.0 & libc::O_TRUNC != 0;
        let writing = flags.0 & libc::O_ACCMODE != libc::O_RDONLY;
        if writing || truncate {
            tri!(reply, self.guard());
        }
        reply.opened(self.open_handle(p, truncate), FopenFlags::FOPEN_DIRECT_IO);
    }

    fn create(&self, _req: &Request, parent: INodeNo, name: &OsStr, _mode: u32, _umask: u32, _flags: i32, reply: ReplyCreate) {
        tri!(reply, self.guard());
        let p = tri!(reply, self.child(parent, name).ok_or_else(noent));
        let fh = self.open_handle(p.clone(), true);
        let a = tri!(reply, self.attr(&p));
        reply.created(&TTL, &a, Generation(0), fh, FopenFlags::FOPEN_DIRECT_IO);
    }

    fn read(
        &self,
        _req: &Request,
        ino: INodeNo,
        fh: FileHandle,
        offset: u64,
        size: u32,
        _flags: OpenFlags,
        _lock_owner: Option<LockOwner>,
        reply: ReplyData,
    ) {
        let buffered = {
            let hs = self.handles.lock().expect("handles");
            hs.get(&fh.0).filter(|h| h.dirty).and_then(|h| h.buf.clone())
        };
        let data = match buffered {
            Some(b) => b,
            None => {
                let p = tri!(reply, self.path(ino).ok_or_else(noent));
                tri!(reply, self.fs.read(&p).map_err(|e| errno(&e)))
            }
        };
        let start = (offset as usize).min(data.len());
        let end = (start + size as usize).min(data.len());
        reply.data(&data[start..end]);
    }

    fn write(
        &self,
        _req: &Request,
        _ino: INodeNo,
        fh: FileHandle,
        offset: u64,
        data: &[u8],
        _write_flags: WriteFlags,
        _flags: OpenFlags,
        _lock_owner: Option<LockOwner>,
        reply: ReplyWrite,
    ) {
        tri!(reply, self.guard());
        let mut hs = self.handles.lock().expect("handles");
        let h = tri!(reply, hs.get_mut(&fh.0).ok_or(Errno::from_i32(libc::EBADF)));
        let mut b = h.buf.take().unwrap_or_else(|| self.fs.read(&h.path).unwrap_or_default());
        let off = offset as usize;
        if b.len() < off + data.len() {
            b.resize(off + data.len(), 0);
        }
        b[off..off + data.len()].copy_from_slice(data);
        h.buf = Some(b);
        h.dirty = true;
        reply.written(data.len() as u32);
    }

    fn flush(&self, _req: &Request, _ino: INodeNo, fh: FileHandle, _lock_owner: LockOwner, reply: ReplyEmpty) {
        tri!(reply, self.flush_handle(fh));
        reply.ok();
    }

    fn release(
        &self,
        _req: &Request,
        _ino: INodeNo,
        fh: FileHandle,
        _flags: OpenFlags,
        _lock_owner: Option<LockOwner>,
        _flush: bool,
        reply: ReplyEmpty,
    ) {
        let r = self.flush_handle(fh);
        self.handles.lock().expect("handles").remove(&fh.0);
        tri!(reply, r);
        reply.ok();
    }

    fn readdir(&self, _req: &Request, ino: INodeNo, _fh: FileHandle, offset: u64, mut reply: ReplyDirectory) {
        let p = tri!(reply, self.path(ino).ok_or_else(noent));
        let mut names = tri!(reply, self.fs.list(&p).map_err(|e| errno(&e)));
        names.sort();
        let mut entries = vec![
            (ino, FileType::Directory, ".".to_string()),
            (ino, FileType::Directory, "..".to_string()),
        ];
        for n in names {
            let cp = if p == "/" { format!("/{n}") } else { format!("{p}/{n}") };
            let kind = match self.fs.stat(&cp, false).map(|i| i.kind) {
                Ok(NodeKind::Directory) => FileType::Directory,
                Ok(NodeKind::Symlink) => FileType::Symlink,
                _ => FileType::RegularFile,
            };
            entries.push((self.ino(&cp), kind, n));
        }
        for (i, (ino, kind, name)) in entries.into_iter().enumerate().skip(offset as usize) {
            if reply.add(ino, i as u64 + 1, kind, name) {
                break;
            }
        }
        reply.ok();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.store.log_level);
    match std::fs::read_dir(&cli.mountpoint).map(|mut d| d.next().is_none()) {
        Ok(true) => {}
        Ok(false) => {
            eprintln!("yancmount: {}: mountpoint busy", cli.mountpoint.display());
            return ExitCode::from(16);
        }
        Err(e) => {
            eprintln!("yancmount: {}: {e}", cli.mountpoint.display());
            return ExitCode::FAILURE;
        }
    }
    let fs = match cli.store.connect("yancmount") {
        Ok(fs) => fs,
        Err(e) => {
            eprintln!("yancmount: {e}");
            return ExitCode::from(3);
        }
    };
    // the mount shows the store's /net tree
    let m = Mount {
        fs,
        read_only: cli.read_only,
        root: "/net".into(),
        inodes: Mutex::default(),
        handles: Mutex::default(),
        next_fh: AtomicU64::new(1),
        uid: unsafe { libc::getuid() },
        gid: unsafe { libc::getgid() },
    };
    let mut cfg = Config::default();
    cfg.mount_options = vec![MountOption::FSName("yanc".into()), MountOption::DefaultPermissions];
    if cli.read_only {
        cfg.mount_options.push(MountOption::RO);
    }
    match fuser::mount(m, &cli.mountpoint, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("yancmount: {e}");
            ExitCode::FAILURE
        }
    }
}
