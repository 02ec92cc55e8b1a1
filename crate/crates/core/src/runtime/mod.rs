//! Execution of MiniLang programs: profiled interpretation, compiled code and
//! fork dispatch, under a virtual or wall clock.

mod clock;
mod cost;
mod machine;
mod profile;

pub use clock::{Clock, ClockError, ClockMode};
pub use cost::CostTable;
pub use machine::{
    Code, Dispatcher, ExcludedCategory, ExecTrace, FrameInfo, Jit, Machine, NoJit, RuntimeError, Tier, TraceEvent,
    DEFAULT_COMPILE_THRESHOLD, DEFAULT_MAX_DEPTH,
};
pub(crate) use machine::{binary, unary};
pub use profile::{BranchProfile, FunctionProfile, LoopProfile, ProfileError, Profiles};

use crate::lang::{Program, Value};

/// Interprets `entry` once. Profiles and clock are updated in place; the
/// returned trace carries the output and, when `trace` is set, the event log.
pub fn interpret(
    program: &Program,
    entry: &str,
    args: &[Value],
    clock: &mut Clock,
    profiles: &mut Profiles,
    trace: bool,
) -> Result<(Option<Value>, ExecTrace), RuntimeError> {
    let mut m = Machine::interpreter(program, clock.clone()).with_profiles(std::mem::take(profiles));
    if trace {
        m.enable_trace();
    }
    let result = m.call(entry, args);
    *clock = m.clock().clone();
    let mut t = m.take_trace().unwrap_or_default();
    t.output = m.take_output();
    *profiles = m.into_profiles();
    result.map(|v| (v, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse, LoopId, NodeKind};

    fn run(src: &str, args: &[Value]) -> (Result<Option<Value>, RuntimeError>, ExecTrace, Profiles, Clock) {
        let p = parse(src).unwrap();
        let mut clock = Clock::virtual_clock();
        let mut profiles = Profiles::default();
        let r = interpret(&p, &p.entry.clone(), args, &mut clock, &mut profiles, true);
        match r {
            Ok((v, t)) => (Ok(v), t, profiles, clock),
            Err(e) => (Err(e), ExecTrace::default(), profiles, clock),
        }
    }

    #[test]
    fn out_of_sum() {
        let (v, t, _, _) = run("fn main(){ out(1+2); }", &[]);
        assert_eq!(v, Ok(None));
        assert_eq!(t.output, vec![Value::Int(3)]);
    }

    #[test]
    fn loop_profile_counts() {
        let (_, _, p, _) = run("fn main(){ for (i = 0; i < 8; i += 1) { out(i); } }", &[]);
        let lp = p.function("main").unwrap().loops[&LoopId(0)];
        assert_eq!((lp.entries, lp.total_iterations, lp.max_trip), (1, 8, 8));
    }

    #[test]
    fn body_cost_contributes_per_iteration() {
        // Body `x = x + 1` inside a block: Block, Assign, BinOp, LocalRead, Const.
        let src = "fn main(){ let x = 0; for (i = 0; i < 8; i += 1) { x = x + 1; } }";
        let (_, t, _, clock) = run(src, &[]);
        let total: u64 = t
            .events
            .iter()
            .map(|e| match e {
                TraceEvent::Cost { cost, .. } | TraceEvent::Excluded { cost, .. } => *cost,
                _ => 0,
            })
            .sum();
        assert_eq!(total, clock.now());
        let assigns = t
            .events
            .iter()
            .filter(|e| matches!(e, TraceEvent::Cost { kind: NodeKind::Assign, .. }))
            .count();
        assert_eq!(assigns, 8);
        // let(1) + const(1) + block(1); for: init 1 + const 1; 9 checks of
        // (3 + const 1); 8 steps of (3 + const 1); 8 bodies of 5.
        assert_eq!(clock.now(), 3 + 2 + 9 * 4 + 8 * 4 + 8 * 5);
    }

    #[test]
    fn errors() {
        assert_eq!(run("fn main(){ out(1/0); }", &[]).0, Err(RuntimeError::DivisionByZero));
        assert_eq!(run("fn main(){ out(1.0 % 0); }", &[]).0, Err(RuntimeError::DivisionByZero));
        assert!(matches!(
            run("global a[2]; fn main(){ out(a[2]); }", &[]).0,
            Err(RuntimeError::IndexOutOfBounds { .. })
        ));
        assert_eq!(
            run("fn main(){ out(g); }", &[]).0,
            Err(RuntimeError::UnknownGlobal("g".into()))
        );
        assert_eq!(
            run("fn f(n){ return f(n + 1); } fn main(){ f(0); }", &[]).0,
            Err(RuntimeError::StackOverflow(DEFAULT_MAX_DEPTH))
        );
        assert!(matches!(run("fn main(){ pause(0 - 1); }", &[]).0, Err(RuntimeError::NegativePause(-1))));
    }

    #[test]
    fn wrapping_and_promotion() {
        let (_, t, _, _) = run(
            "fn main(){ out(9223372036854775807 + 1); out(1 + 0.5); out(7 / 2); out(0 - 7 % 3); out(!0); }",
            &[],
        );
        assert_eq!(
            t.output,
            vec![
                Value::Int(i64::MIN),
                Value::Float(1.5),
                Value::Int(3),
                Value::Int(-1),
                Value::Int(1)
            ]
        );
    }

    #[test]
    fn recursion_and_return_values() {
        let src = "fn fib(n){ if (n < 2) { return n; } return fib(n - 1) + fib(n - 2); } fn main(n){ return fib(n); }";
        let (v, _, p, _) = run(src, &[Value::Int(10)]);
        assert_eq!(v, Ok(Some(Value::Int(55))));
        assert_eq!(p.invocations("fib"), 177);
    }

    #[test]
    fn pause_is_excluded_cost() {
        let (_, t, _, clock) = run("fn main(){ pause(100); }", &[]);
        assert!(t.events.contains(&TraceEvent::Excluded {
            frame: 0,
            cost: 100,
            category: ExcludedCategory::Safepoint
        }));
        assert!(clock.now() > 100);
    }

    #[test]
    fn virtual_runs_are_deterministic() {
        let src = "global s; fn main(n){ for (i = 0; i < n; i += 1) { s = s + i * i; pause(i % 3); } return s; }";
        let first = run(src, &[Value::Int(50)]);
        for _ in 0..100 {
            let again = run(src, &[Value::Int(50)]);
            assert_eq!(again.0, first.0);
            assert_eq!(again.2, first.2);
            assert_eq!(again.3.now(), first.3.now());
        }
    }

    #[test]
    fn short_circuit_skips_rhs() {
        let (v, _, _, _) = run("fn main(){ return 0 && 1 / 0; }", &[]);
        assert_eq!(v, Ok(Some(Value::Int(0))));
    }
}
