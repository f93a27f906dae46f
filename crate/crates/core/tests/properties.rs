use std::collections::BTreeMap;

use proptest::prelude::*;
use vmlab_core::instrumentation::{davis_estimate, DavisInput, Metrics};
use vmlab_core::register_vm::{
    decode_register_program, disassemble, encode_register_program, execute_register, parse_register_source, Operand,
    RegExecConfig, RegInstr, RegOpcode, RegProgram,
};
use vmlab_core::stack_vm::{execute_stack, parse_stack_source, StackExecConfig, Value};

fn dest() -> impl Strategy<Value = Operand> {
    prop_oneof![
        (0u32..65_536).prop_map(Operand::Memory),
        (0u8..4).prop_map(Operand::Register)
    ]
}

fn src() -> impl Strategy<Value = Operand> {
    prop_oneof![dest(), any::<i32>().prop_map(Operand::Const)]
}

fn instr(len: u32) -> impl Strategy<Value = RegInstr> {
    use RegOpcode::*;
    let target = move || (0..=len).prop_map(Operand::Label);
    let three = prop_oneof![
        Just(Add),
        Just(Div),
        Just(Mul),
        Just(Ltn),
        Just(Eql),
        Just(And),
        Just(Or)
    ];
    prop_oneof![
        (three, dest(), src(), src()).prop_map(|(op, a, b, c)| RegInstr::new(op, &[a, b, c]).unwrap()),
        (prop_oneof![Just(Not), Just(Load)], dest(), src()).prop_map(|(op, a, b)| RegInstr::new(op, &[a, b]).unwrap()),
        (prop_oneof![Just(Inc), Just(Dec)], dest()).prop_map(|(op, a)| RegInstr::new(op, &[a]).unwrap()),
        src().prop_map(|a| RegInstr::new(Print, &[a]).unwrap()),
        (prop_oneof![Just(Goto), Just(Call)], target()).prop_map(|(op, t)| RegInstr::new(op, &[t]).unwrap()),
        (dest(), target()).prop_map(|(a, t)| RegInstr::new(If, &[a, t]).unwrap()),
        Just(RegInstr::new(Return, &[]).unwrap()),
    ]
}

fn program() -> impl Strategy<Value = RegProgram> {
    (0u32..24).prop_flat_map(|len| {
        prop::collection::vec(instr(len), len as usize)
            .prop_map(|instrs| RegProgram::new(instrs, BTreeMap::new()).unwrap())
    })
}

fn finite() -> impl Strategy<Value = f64> {
    -1e6f64..1e6
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn binary_roundtrip(p in program()) {
        let bytes = encode_register_program(&p);
        let back = decode_register_program(&bytes).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(encode_register_program(&back), bytes);
    }

    #[test]
    fn text_roundtrip(p in program()) {
        let text = disassemble(&p);
        prop_assert_eq!(parse_register_source(&text).unwrap(), p);
    }

    #[test]
    fn decoder_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..80)) {
        let mut framed = b"GNFB\x01\0\0\0".to_vec();
        framed.extend_from_slice(&bytes);
        for input in [bytes, framed] {
            if let Ok(p) = decode_register_program(&input) {
                prop_assert_eq!(encode_register_program(&p), input);
            }
        }
    }

    #[test]
    fn stack_int_arithmetic_wraps(a in any::<i32>(), b in any::<i32>()) {
        for (op, want) in [("iadd", b.wrapping_add(a)), ("imul", b.wrapping_mul(a))] {
            let src = format!("procedure main\niconst {a}\niconst {b}\n{op}\nret\n");
            let r = execute_stack(&parse_stack_source(&src).unwrap(), &StackExecConfig::default()).unwrap();
            prop_assert_eq!(r.outcome, Some(Value::Int(want)));
        }
    }

    #[test]
    fn register_arithmetic_wraps(a in any::<i32>(), b in any::<i32>()) {
        let src = format!("load R1 #{a}\nload R2 #{b}\nadd R0 R1 R2\nmul R3 R1 R2\nreturn\n");
        let r = execute_register(&parse_register_source(&src).unwrap(), &RegExecConfig::default()).unwrap();
        prop_assert_eq!(r.outcome.registers[0], a.wrapping_add(b));
        prop_assert_eq!(r.outcome.registers[3], a.wrapping_mul(b));
    }

    #[test]
    fn davis_is_linear_in_time_fields(
        t in finite(), dd in finite(), td in finite(), df in finite(), tf in finite(), k in -8f64..8.0,
    ) {
        let base = DavisInput { t_vsm_us: t, delta_dispatches: dd, t_dispatch_us: td, delta_fetches: df, t_fetch_us: tf };
        let scaled = DavisInput { t_vsm_us: k * t, t_dispatch_us: k * td, t_fetch_us: k * tf, ..base };
        prop_assert!(close(davis_estimate(&scaled), k * davis_estimate(&base)));
        let zero = DavisInput { delta_dispatches: 0.0, delta_fetches: 0.0, ..base };
        prop_assert_eq!(davis_estimate(&zero), t);
    }

    #[test]
    fn metric_mean_ignores_run_order(
        times in prop::collection::vec((0f64..1e4, 0f64..1e4, 0f64..1e4), 1..12),
        rotate in 0usize..12,
    ) {
        let runs: Vec<Metrics> = times
            .iter()
            .map(|&(f, d, e)| Metrics {
                dispatch_count: 7,
                fetch_count: 9,
                fetch_time_us: f,
                dispatch_time_us: d,
                exec_time_us: e,
                repetitions: 1,
            })
            .collect();
        let mut shuffled = runs.clone();
        shuffled.rotate_left(rotate % runs.len());
        shuffled.reverse();
        let a = Metrics::mean_of(&runs).unwrap();
        let b = Metrics::mean_of(&shuffled).unwrap();
        prop_assert_eq!((a.dispatch_count, a.fetch_count, a.repetitions), (b.dispatch_count, b.fetch_count, b.repetitions));
        prop_assert!(close(a.fetch_time_us, b.fetch_time_us));
        prop_assert!(close(a.dispatch_time_us, b.dispatch_time_us));
        prop_assert!(close(a.exec_time_us, b.exec_time_us));
    }
}
