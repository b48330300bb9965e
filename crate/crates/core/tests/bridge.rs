//! Bridge client against scripted `sh` processes.

use fsrc_core::encoder::bridge::BRIDGE_ENV;
use fsrc_core::encoder::{BridgeEncoder, Encoder, EncoderHandle};
use fsrc_core::Error;

const HANDSHAKE: &str = r#"printf '{"protocol_version":1,"dim":3,"model_name":"scripted"}\n'"#;

fn spawn_err(command: &str) -> Error {
    match BridgeEncoder::spawn(command) {
        Ok(_) => panic!("{command} was accepted"),
        Err(e) => e,
    }
}

#[test]
fn handshake_is_read_on_spawn() {
    let bridge = BridgeEncoder::spawn(&format!("{HANDSHAKE}; cat >/dev/null")).unwrap();
    assert_eq!(bridge.handshake().model_name, "scripted");
    assert_eq!(bridge.dim(), 3);
    assert_eq!(bridge.info().metadata["protocol_version"], "1");
}

#[test]
fn bad_handshakes_are_unavailable() {
    let version = r#"printf '{"protocol_version":2,"dim":3,"model_name":"x"}\n'"#;
    assert!(matches!(spawn_err(version), Error::BridgeUnavailable(m) if m.contains("version 2")));
    assert!(matches!(spawn_err("exit 0"), Error::BridgeUnavailable(_)));
    assert!(matches!(spawn_err("echo not json"), Error::BridgeUnavailable(_)));
}

#[test]
fn scripted_responses_round_trip_out_of_order() {
    let script = format!(
        r#"{HANDSHAKE}; read a; read b; printf '{{"id":1,"vec":[0,1,0]}}\n{{"id":0,"vec":[1,0,0]}}\n'; cat >/dev/null"#
    );
    let bridge = BridgeEncoder::spawn(&script).unwrap();
    let got = bridge.embed_batch(&["first", "second"]).unwrap();
    assert_eq!(got[0].values(), [1.0, 0.0, 0.0]);
    assert_eq!(got[1].values(), [0.0, 1.0, 0.0]);
}

#[test]
fn wrong_length_vector_is_a_dimension_mismatch() {
    let script = format!(r#"{HANDSHAKE}; read a; printf '{{"id":0,"vec":[1,2]}}\n'; cat >/dev/null"#);
    let handle = EncoderHandle::Bridged(BridgeEncoder::spawn(&script).unwrap());
    assert!(matches!(handle.embed("x"), Err(Error::DimensionMismatch(2, 3))));
}

#[test]
fn error_responses_and_early_exit_surface() {
    let script = format!(r#"{HANDSHAKE}; read a; printf '{{"id":0,"error":"oom"}}\n'; cat >/dev/null"#);
    let bridge = BridgeEncoder::spawn(&script).unwrap();
    assert!(matches!(bridge.embed("x"), Err(Error::BridgeUnavailable(m)) if m.contains("oom")));

    let bridge = BridgeEncoder::spawn(&format!("{HANDSHAKE}; read a")).unwrap();
    assert!(matches!(bridge.embed("x"), Err(Error::BridgeUnavailable(_))));
}

#[test]
fn empty_text_is_rejected_before_sending() {
    let bridge = BridgeEncoder::spawn(&format!("{HANDSHAKE}; cat >/dev/null")).unwrap();
    assert!(matches!(bridge.embed(""), Err(Error::EmptyText)));
}

#[test]
fn command_comes_from_the_environment() {
    std::env::set_var(BRIDGE_ENV, format!("{HANDSHAKE}; cat >/dev/null"));
    let bridge = BridgeEncoder::from_env().unwrap();
    assert_eq!(bridge.handshake().model_name, "scripted");
    std::env::remove_var(BRIDGE_ENV);
    assert!(matches!(BridgeEncoder::from_env(), Err(Error::BridgeUnavailable(m)) if m.contains(BRIDGE_ENV)));
}
