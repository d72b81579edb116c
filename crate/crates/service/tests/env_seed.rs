//! Kept in its own binary: it mutates the process environment.

use impetus_service::config::MASTER_SEED_ENV;
use impetus_service::{ServiceError, SessionConfig};

#[test]
fn environment_overrides_the_configured_seed() {
    let config = SessionConfig {
        master_seed: 1,
        ..SessionConfig::default()
    };
    std::env::remove_var(MASTER_SEED_ENV);
    assert_eq!(config.clone().apply_env().unwrap().master_seed, 1);

    std::env::set_var(MASTER_SEED_ENV, " 4242 ");
    assert_eq!(config.clone().apply_env().unwrap().master_seed, 4242);

    std::env::set_var(MASTER_SEED_ENV, "lots");
    assert!(matches!(config.apply_env(), Err(ServiceError::BadRequest(_))));
    std::env::remove_var(MASTER_SEED_ENV);
}
