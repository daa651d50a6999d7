use wra_core::channel::RotatingChannel;
use wra_core::env::dsa::*;

#[test]
fn dqn_tracks_rotating_channel() {
    let mut world = RotatingChannel::new(4, 0).unwrap();
    let cfg = DsaTrainConfig {
        steps: 10_000,
        ..Default::default()
    };
    let (learner, log) = train_single_user(&mut world, &cfg, 0).unwrap();
    assert!(!log.rows.is_empty());
    let follower = evaluate_single_user(&mut world, &SingleUserPolicy::FollowRotation, 2000, 1).unwrap();
    let dqn = evaluate_single_user(&mut world, &SingleUserPolicy::Dqn(&learner, cfg.history), 2000, 1).unwrap();
    assert!(follower > 0.99, "{follower}");
    assert!(dqn >= 0.9 * follower, "dqn {dqn} vs follower {follower}");
}

#[test]
fn dqn_finds_free_tdma_slots() {
    let mut peers = CoexistPeers::new(vec![true, true, false, false], 0.0).unwrap();
    let cfg = DsaTrainConfig {
        steps: 10_000,
        ..Default::default()
    };
    let (learner, _) = train_coexist(&mut peers, &cfg, 0).unwrap();
    let rate = evaluate_coexist(&learner, &mut peers, cfg.history, 10_000, 1).unwrap();
    assert!(rate >= 0.45, "{rate}");
}

#[test]
fn two_users_share_two_channels() {
    let cfg = MultiUserConfig::default();
    let (learner, _) = train_multi_user(&cfg, 0).unwrap();
    let summary = evaluate_multi_user(&learner, &cfg, 2000, 1).unwrap();
    assert!(summary.utilization >= 0.9, "{}", summary.utilization);
    assert!(summary.csv.starts_with("episode,user,success_rate,utilization,log_utility"));
}

#[test]
fn replay_off_trains() {
    let cfg = MultiUserConfig {
        replay_off: true,
        steps: 500,
        ..Default::default()
    };
    let (learner, log) = train_multi_user(&cfg, 3).unwrap();
    assert_eq!(log.rows.len(), 1);
    let summary = evaluate_multi_user(&learner, &cfg, 200, 1).unwrap();
    assert!((0.0..=1.0).contains(&summary.utilization));
}
