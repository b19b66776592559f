mod common;

use common::{bijection, commit, sw};
use yanc_core::apps::{packet_out, pending_records};
use yanc_core::codec::packet::tcp_frame;
use yanc_core::codec::{Action, FlowModCommand, OfBody, PacketInReason};
use yanc_core::sim::{SimError, Topology, HOST_PORT};
use yanc_core::testbed::Testbed;
use yanc_core::MacAddr;

fn frame() -> Vec<u8> {
    tcp_frame(MacAddr::from_u64(1), MacAddr::from_u64(2), 0x0a00_0001, 0x0a00_0002, 1000, 22)
}

fn text(tb: &Testbed, p: &str) -> String {
    tb.fs.read_text(p).unwrap_or_else(|e| panic!("{p}: {e}"))
}

#[test]
fn handshake_publishes_switch_and_ports() {
    let tb = Testbed::new(&Topology::linear(2)).unwrap();
    for d in [1, 2] {
        let s = sw(d);
        assert_eq!(text(&tb, &format!("{s}/status")), "connected");
        assert_eq!(text(&tb, &format!("{s}/n_tables")), "1");
        let sim = tb.fabric.switch(d).unwrap();
        let mut ports = tb.fs.list(&format!("{s}/ports")).unwrap();
        ports.sort();
        assert_eq!(ports, vec!["1", "2", "3"]);
        for (n, p) in &sim.ports {
            let pp = format!("{s}/ports/{n}");
            assert_eq!(text(&tb, &format!("{pp}/hw_addr")), p.hw_addr.to_string());
            assert_eq!(text(&tb, &format!("{pp}/config.port_status")), "up");
            assert_eq!(text(&tb, &format!("{pp}/config.port_down")), "0");
        }
        // Only the handshake wipe so far.
        assert_eq!(sim.table.len(), 0);
    }
}

#[test]
fn flow_lifecycle_tracks_the_table() {
    let mut tb = Testbed::new(&Topology::linear(1)).unwrap();
    let f = format!("{}/flows/ssh", sw(1));
    commit(
        tb.fs.as_ref(),
        &f,
        &[
            ("match.tp_dst", "22"),
            ("match.dl_type", "0x0800"),
            ("match.nw_proto", "6"),
            ("action.0.output", "2"),
        ],
    )
    .unwrap();
    tb.pump();
    assert_eq!(bijection(&tb, 1), Ok(1));

    // Same slot, new actions: updated in place.
    let id = tb.fabric.switch(1).unwrap().table.entries()[0].id;
    commit(tb.fs.as_ref(), &f, &[("action.0.output", "3")]).unwrap();
    tb.pump();
    assert_eq!(bijection(&tb, 1), Ok(1));
    let e = tb.fabric.switch(1).unwrap().table.entries()[0].clone();
    assert_eq!((e.id, e.actions), (id, vec![Action::output(3)]));

    // New priority moves the slot.
    commit(tb.fs.as_ref(), &f, &[("priority", "7")]).unwrap();
    tb.pump();
    assert_eq!(bijection(&tb, 1), Ok(1));
    assert_eq!(tb.fabric.switch(1).unwrap().table.entries()[0].priority, 7);

    // Staged but uncommitted edits stay off the switch.
    tb.fs.write(&format!("{f}/action.0.output"), b"1").unwrap();
    tb.pump();
    assert_eq!(tb.fabric.switch(1).unwrap().table.entries()[0].actions, vec![Action::output(3)]);

    tb.fs.remove(&f, true).unwrap();
    tb.pump();
    assert_eq!(bijection(&tb, 1), Ok(0));
    assert!(tb.fabric.switch(1).unwrap().table.is_empty());
}

#[test]
fn flow_mod_commands_follow_the_slot_rule() {
    let mut tb = Testbed::new(&Topology::linear(1)).unwrap();
    let sid = tb.driver.session_for(1).unwrap();
    let f = format!("{}/flows/a", sw(1));
    commit(tb.fs.as_ref(), &f, &[("match.in_port", "1"), ("action.0.output", "2")]).unwrap();
    tb.pump();
    commit(tb.fs.as_ref(), &f, &[("action.0.output", "3")]).unwrap();
    tb.pump();
    commit(tb.fs.as_ref(), &f, &[("match.in_port", "2")]).unwrap();
    tb.pump();
    let cmds: Vec<FlowModCommand> = tb
        .driver
        .sent(sid)
        .iter()
        .filter_map(|m| match &m.body {
            OfBody::FlowMod(fm) => Some(fm.command),
            _ => None,
        })
        .collect();
    use FlowModCommand::*;
    assert_eq!(cmds, vec![Delete, Add, ModifyStrict, DeleteStrict, Add]);
}

#[test]
fn port_down_file_becomes_a_port_mod() {
    let mut tb = Testbed::new(&Topology::linear(1)).unwrap();
    let pd = format!("{}/ports/{HOST_PORT}/config.port_down", sw(1));
    tb.fs.write(&pd, b"1").unwrap();
    tb.pump();
    assert!(tb.fabric.switch(1).unwrap().ports[&HOST_PORT].admin_down);
    assert_eq!(tb.send(1, HOST_PORT, &frame()), Err(SimError::PortDown(1, HOST_PORT)));
    tb.fs.write(&pd, b"0").unwrap();
    tb.pump();
    assert!(!tb.fabric.switch(1).unwrap().ports[&HOST_PORT].admin_down);
    assert!(tb.send(1, HOST_PORT, &frame()).is_ok());
}

#[test]
fn link_loss_updates_port_status() {
    let mut tb = Testbed::new(&Topology::linear(2)).unwrap();
    tb.fabric.unlink(1, 2).unwrap();
    tb.pump();
    assert_eq!(text(&tb, &format!("{}/ports/2/config.port_status", sw(1))), "down");
    assert_eq!(text(&tb, &format!("{}/ports/1/config.port_status", sw(2))), "down");
    assert_eq!(text(&tb, &format!("{}/ports/3/config.port_status", sw(1))), "up");
}

#[test]
fn packet_in_lands_in_every_event_buffer() {
    let mut tb = Testbed::new(&Topology::linear(1)).unwrap();
    let ev = format!("{}/events", sw(1));
    for app in ["a", "b"] {
        tb.fs.mkdir(&format!("{ev}/{app}")).unwrap();
    }
    tb.send(1, HOST_PORT, &frame()).unwrap();
    for app in ["a", "b"] {
        let recs = pending_records(tb.fs.as_ref(), &format!("{ev}/{app}")).unwrap();
        assert_eq!(recs.len(), 1, "{app}");
        let r = &recs[0].1;
        assert_eq!((r.in_port, r.reason, r.buffer_id), (HOST_PORT, PacketInReason::NoMatch, None));
        assert_eq!(r.data, frame());
        assert_eq!(usize::from(r.total_len), frame().len());
        tb.fs.ack_event(&recs[0].0).unwrap();
        assert!(pending_records(tb.fs.as_ref(), &format!("{ev}/{app}")).unwrap().is_empty());
    }
}

#[test]
fn packet_out_records_are_sent_and_removed() {
    let mut tb = Testbed::new(&Topology::linear(2)).unwrap();
    let s = sw(1);
    tb.fabric.take_report();
    packet_out(tb.fs.as_ref(), &s, "t", None, &[HOST_PORT, 1], &frame()).unwrap();
    tb.pump();
    let rep = tb.fabric.take_report();
    let mut outs: Vec<(u64, u16)> = rep.edge_emissions().map(|e| (e.dpid, e.port)).collect();
    outs.sort();
    assert_eq!(outs, vec![(1, 1), (1, HOST_PORT)]);
    assert!(rep.emissions.iter().all(|e| e.frame == frame()));
    let left: Vec<String> = tb.fs.list(&format!("{s}/packets_out")).unwrap();
    assert!(left.is_empty(), "{left:?}");

    // With the switch gone the record is consumed and an error left behind.
    tb.disconnect(1);
    tb.pump();
    packet_out(tb.fs.as_ref(), &s, "t", Some(3), &[2], &frame()).unwrap();
    tb.pump();
    assert_eq!(text(&tb, &format!("{s}/packets_out/error")), "disconnected");
    assert_eq!(tb.fs.list(&format!("{s}/packets_out")).unwrap(), vec!["error"]);
}

#[test]
fn reconnect_reconciles_the_table() {
    let mut tb = Testbed::new(&Topology::linear(1)).unwrap();
    let s = sw(1);
    commit(
        tb.fs.as_ref(),
        &format!("{s}/flows/keep"),
        &[("match.in_port", "1"), ("action.0.output", "2")],
    )
    .unwrap();
    tb.pump();
    tb.disconnect(1);
    tb.pump();
    assert_eq!(text(&tb, &format!("{s}/status")), "disconnected");

    // Edits while disconnected, plus junk the switch kept from before.
    commit(
        tb.fs.as_ref(),
        &format!("{s}/flows/new"),
        &[("match.in_port", "2"), ("action.0.output", "1")],
    )
    .unwrap();
    tb.fs.remove(&format!("{s}/flows/keep"), true).unwrap();
    tb.fabric
        .switch_mut(1)
        .unwrap()
        .table
        .insert(yanc_core::codec::OfMatch::all(), 9, vec![]);
    tb.pump();
    assert_eq!(tb.fabric.switch(1).unwrap().table.len(), 2);

    tb.connect(1).unwrap();
    tb.pump();
    assert_eq!(text(&tb, &format!("{s}/status")), "connected");
    assert_eq!(bijection(&tb, 1), Ok(1));
    assert_eq!(tb.fabric.switch(1).unwrap().table.entries()[0].of_match.in_port, Some(2));
}
