//! Schema behaviour checked through nothing but `FsApi`, so the same cases
//! run against the in-process facade and against a remote client.

use yanc_core::schema::EventRecord;
use yanc_core::{FsApi, FsError};

use super::sw;

pub type Case = (&'static str, fn(&dyn FsApi));

pub const CASES: [Case; 9] = [
    ("skeletons", skeletons),
    ("staging_and_commit", staging_and_commit),
    ("field_grammar", field_grammar),
    ("typed_removal", typed_removal),
    ("reserved_names", reserved_names),
    ("event_buffers", event_buffers),
    ("peer_links", peer_links),
    ("packet_out_records", packet_out_records),
    ("rename_rules", rename_rules),
];

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

fn skeletons(fs: &dyn FsApi) {
    fs.mkdir("/net/views/v1").unwrap();
    assert_eq!(sorted(fs.list("/net/views/v1").unwrap()), ["hosts", "switches", "views"]);
    fs.mkdir("/net/views/v1/views/v2").unwrap();
    assert_eq!(sorted(fs.list("/net/views/v1/views/v2").unwrap()), ["hosts", "switches", "views"]);
    let s = sw(0x11);
    fs.mkdir(&s).unwrap();
    assert_eq!(sorted(fs.list(&s).unwrap()), ["events", "flows", "packets_out", "ports"]);
    assert!(matches!(fs.mkdir("/net/switches/xyz"), Err(FsError::InvalidName(_))));
    assert!(matches!(fs.mkdir("/net/other"), Err(FsError::NotASchemaPoint(_))));
}

fn staging_and_commit(fs: &dyn FsApi) {
    let s = sw(0x12);
    fs.mkdir(&s).unwrap();
    let f = format!("{s}/flows/web");
    fs.mkdir(&f).unwrap();
    assert_eq!(fs.read_text(&format!("{f}/version")).unwrap(), "0");
    for (k, v) in [
        ("match.dl_type", "0x0800"),
        ("match.nw_proto", "6"),
        ("match.tp_dst", "80"),
        ("action.0.output", "2"),
    ] {
        fs.write(&format!("{f}/{k}"), v.as_bytes()).unwrap();
    }
    assert_eq!(fs.commit_flow(&f).unwrap(), 1);
    fs.write(&format!("{f}/match.tp_dst"), b"8080").unwrap();
    assert_eq!(fs.read_text(&format!("{f}/match.tp_dst")).unwrap(), "8080");
    fs.write(&format!("{f}/version"), b"1").unwrap();
    assert_eq!(fs.read_text(&format!("{f}/version")).unwrap(), "2");
    // an invalid staged set is refused and the version stays put
    fs.write(&format!("{f}/match.dl_type"), b"0x0806").unwrap();
    assert!(matches!(fs.commit_flow(&f), Err(FsError::ValidationFailed { .. })));
    assert_eq!(fs.read_text(&format!("{f}/version")).unwrap(), "2");
}

fn field_grammar(fs: &dyn FsApi) {
    let s = sw(0x13);
    fs.mkdir(&s).unwrap();
    let f = format!("{s}/flows/g");
    fs.mkdir(&f).unwrap();
    let put = |k: &str, v: &str| fs.write(&format!("{f}/{k}"), v.as_bytes());
    put("match.nw_src", "10.0.0.0/8").unwrap();
    put("match.dl_src", "00:11:22:33:44:55").unwrap();
    put("action.0.output", "controller").unwrap();
    put("action.1.set_dl_dst", "02:00:00:00:00:01").unwrap();
    put("priority", "65535").unwrap();
    assert!(matches!(put("priority", "65536"), Err(FsError::RangeError { .. })));
    assert!(matches!(
        put("match.nw_src", "10.0.0.0/33"),
        Err(FsError::ParseError { .. } | FsError::RangeError { .. })
    ));
    assert!(matches!(put("match.dl_src", "00:11:22"), Err(FsError::ParseError { .. })));
    assert!(matches!(put("match.colour", "red"), Err(FsError::UnknownField(_))));
    assert!(matches!(put("action.0.output", "0"), Err(FsError::RangeError { .. })));
    // refused writes leave the previous payload
    assert_eq!(fs.read_text(&format!("{f}/priority")).unwrap(), "65535");
}

fn typed_removal(fs: &dyn FsApi) {
    let s = sw(0x14);
    fs.mkdir(&s).unwrap();
    fs.mkdir(&format!("{s}/ports/1")).unwrap();
    fs.mkdir(&format!("{s}/flows/a")).unwrap();
    fs.remove(&s, false).unwrap();
    assert!(!fs.exists(&s));
    assert!(matches!(fs.remove("/net/switches", true), Err(FsError::InvalidArgument(_))));
    fs.mkdir("/net/views/gone").unwrap();
    fs.remove("/net/views/gone", false).unwrap();
    assert!(!fs.exists("/net/views/gone"));
}

fn reserved_names(fs: &dyn FsApi) {
    let s = sw(0x15);
    fs.mkdir(&s).unwrap();
    assert!(matches!(fs.mkdir(&format!("{s}/flows/a,b")), Err(FsError::InvalidName(_))));
    assert!(matches!(fs.mkdir(&format!("{s}/ports/zero")), Err(FsError::InvalidName(_))));
}

fn event_buffers(fs: &dyn FsApi) {
    let s = sw(0x16);
    fs.mkdir(&s).unwrap();
    let a = fs.open_event_buffer(&s, "a").unwrap();
    let b = fs.open_event_buffer(&s, "b").unwrap();
    let rec = EventRecord {
        buffer_id: Some(7),
        in_port: 2,
        reason: yanc_core::codec::PacketInReason::NoMatch,
        total_len: 3,
        data: vec![1, 2, 3],
    };
    assert_eq!(fs.enqueue_event(&s, &rec).unwrap(), 2);
    let names = fs.list(&a).unwrap();
    assert_eq!(names, fs.list(&b).unwrap());
    assert_eq!(names.len(), 1);
    let r = format!("{a}/{}", names[0]);
    assert_eq!(fs.read(&format!("{r}/data")).unwrap(), [1, 2, 3]);
    assert_eq!(fs.read_text(&format!("{r}/in_port")).unwrap(), "2");
    fs.ack_event(&r).unwrap();
    assert!(fs.list(&a).unwrap().is_empty());
    assert_eq!(fs.list(&b).unwrap().len(), 1);
}

fn peer_links(fs: &dyn FsApi) {
    let s = sw(0x17);
    fs.mkdir(&s).unwrap();
    fs.mkdir(&format!("{s}/ports/1")).unwrap();
    let peer = format!("{s}/ports/1/peer");
    let target = format!("{}/ports/4", sw(0x18));
    fs.symlink(&peer, &target).unwrap();
    assert_eq!(fs.readlink(&peer).unwrap(), target);
    fs.remove(&peer, false).unwrap();
    assert!(fs.symlink(&peer, &format!("{}/flows/x", sw(0x18))).is_err());
}

fn packet_out_records(fs: &dyn FsApi) {
    let s = sw(0x19);
    fs.mkdir(&s).unwrap();
    let r = format!("{s}/packets_out/p1");
    fs.mkdir(&r).unwrap();
    fs.write(&format!("{r}/data"), &[0xff; 20]).unwrap();
    fs.write(&format!("{r}/action.0.output"), b"flood").unwrap();
    fs.write(&format!("{r}/in_port"), b"none").unwrap();
    assert!(matches!(fs.write(&format!("{r}/send"), b"yes"), Err(FsError::ParseError { .. })));
    assert!(matches!(fs.write(&format!("{r}/bogus"), b"1"), Err(FsError::UnknownField(_))));
}

fn rename_rules(fs: &dyn FsApi) {
    let s = sw(0x1a);
    fs.mkdir(&s).unwrap();
    fs.mkdir(&format!("{s}/flows/old")).unwrap();
    fs.rename(&format!("{s}/flows/old"), &format!("{s}/flows/new")).unwrap();
    assert!(fs.is_dir(&format!("{s}/flows/new")));
    assert!(fs.rename(&format!("{s}/flows/new"), &format!("{s}/ports/new")).is_err());
    assert!(fs.rename(&format!("{s}/flows/new"), &format!("{s}/flows/a,b")).is_err());
}
