use idmk::idm::*;
use idmk::*;

fn traj(n: usize) -> Trajectory {
    let mut tr = Trajectory::new(TrajectoryMeta::default());
    for i in 0..n {
        let a = Action::new(vec![i % 2 == 0, false], vec![(i % 11) as u8, 5]).unwrap();
        tr.push(
            Position::planar(i as f64, 2.0 * i as f64),
            vec![i as f64, -(i as f64), 0.5, 1.0],
            a,
        );
    }
    tr
}

fn layout(past: usize, future: usize) -> InputLayout {
    InputLayout {
        window: WindowSpec::new(past, future, 1),
        obs_dim: 4,
        actions: ActionSpec::default(),
    }
}

#[test]
fn one_past_one_future_at_start() {
    let tr = traj(5);
    let l = layout(1, 1);
    let mut x = Vec::new();
    l.build_input(&tr.steps, 0, &tr.steps, 1, &mut x).unwrap();
    assert_eq!(x.len(), l.past_block() + l.future_block());
    // obs(0), then a zero action since nothing precedes step 0
    assert_eq!(&x[..8], &[0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.0]);
    // relative position of step 1 and its obs
    assert_eq!(&x[8..15], &[1.0, 2.0, 0.0, 1.0, -1.0, 0.5, 1.0]);
    assert_eq!(&x[15..], tr.steps[1].action.encode().as_slice());
}

#[test]
fn short_history_is_left_padded() {
    let tr = traj(12);
    let l = layout(10, 0);
    let mut x = Vec::new();
    l.build_input(&tr.steps, 3, &tr.steps, 0, &mut x).unwrap();
    let block = l.past_block();
    assert!(x[..6 * block].iter().all(|&v| v == 0.0));
    // the 7th block is step 0 whose action slot is also zero-padded
    assert_eq!(&x[6 * block..6 * block + 4], tr.steps[0].obs.as_slice());
    assert!(x[6 * block + 4..7 * block].iter().all(|&v| v == 0.0));
    // step 3 carries the action taken at step 2
    assert_eq!(&x[9 * block + 4..], tr.steps[2].action.encode().as_slice());
}

#[test]
fn truncated_future_repeats_last_frame() {
    let tr = traj(20);
    let l = layout(1, 10);
    let mut x = Vec::new();
    l.build_input(&tr.steps, 5, &tr.steps, 18, &mut x).unwrap();
    let fb = l.future_block();
    let fut = &x[l.past_block()..];
    let last = &fut[fb..2 * fb];
    for e in 2..10 {
        assert_eq!(&fut[e * fb..(e + 1) * fb], last, "block {e}");
    }
    assert_ne!(&fut[..fb], last);
}

#[test]
fn width_is_constant() {
    let tr = traj(15);
    let l = layout(4, 3);
    let mut x = Vec::new();
    for t in 0..15 {
        for f in 0..15 {
            l.build_input(&tr.steps, t, &tr.steps, f, &mut x).unwrap();
            assert_eq!(x.len(), l.width());
        }
    }
}

#[test]
fn bc_window_ignores_future_index() {
    let tr = traj(15);
    let l = layout(5, 0);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    l.build_input(&tr.steps, 7, &tr.steps, 0, &mut a).unwrap();
    l.build_input(&tr.steps, 7, &tr.steps, 14, &mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn modality_masks() {
    let tr = traj(6);
    let mut x = Vec::new();
    let obs_only = InputLayout {
        window: WindowSpec::new(1, 1, 1).with_modality(Modality::ObservationsOnly),
        ..layout(1, 1)
    };
    obs_only
        .build_input(&tr.steps, 3, &tr.steps, 4, &mut x)
        .unwrap();
    assert!(x[4..8].iter().all(|&v| v == 0.0));
    assert!(x[15..].iter().all(|&v| v == 0.0));
    assert!(x[..4].iter().any(|&v| v != 0.0));

    let act_only = InputLayout {
        window: WindowSpec::new(1, 1, 1).with_modality(Modality::ActionsOnly),
        ..layout(1, 1)
    };
    act_only
        .build_input(&tr.steps, 3, &tr.steps, 4, &mut x)
        .unwrap();
    assert!(x[..4].iter().all(|&v| v == 0.0));
    assert!(x[8..15].iter().all(|&v| v == 0.0));
    assert_eq!(&x[15..], tr.steps[4].action.encode().as_slice());
}

#[test]
fn rejects_bad_inputs() {
    let tr = traj(3);
    let l = layout(1, 1);
    let mut x = Vec::new();
    assert!(l.build_input(&tr.steps, 3, &tr.steps, 0, &mut x).is_err());
    assert!(l.build_input(&tr.steps, 0, &[], 0, &mut x).is_err());
    assert!(WindowSpec::new(0, 0, 0).check().is_err());
    let wrong = InputLayout { obs_dim: 5, ..l };
    assert!(wrong
        .build_input(&tr.steps, 0, &tr.steps, 0, &mut x)
        .is_err());
}
