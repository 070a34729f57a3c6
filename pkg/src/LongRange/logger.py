import logging
import os

logger = logging.getLogger(__name__)


def setup_logging(results_dir, log_name, level=logging.INFO):
    """
    Send log records of the run to a file in its results directory.

    Parameters:
    - results_dir (str): Directory of the run, created if missing.
    - log_name (str): Name of the log file.
    - level (int): Logging level.

    Returns:
    - str: Path of the log file.
    """
    os.makedirs(results_dir, exist_ok=True)
    path = os.path.join(results_dir, log_name)
    logging.basicConfig(filename=path, level=level, force=True,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return path


def log_training_summary(history, best_epoch=None):
    """
    Log the training history row by row.

    Parameters:
    - history (pd.DataFrame): Columns epoch, train_loss, val_acc.
    - best_epoch (int | None): Epoch whose parameters were kept.
    """
    logger.info("Training history:")
    for row in history.itertuples(index=False):
        marker = " (kept)" if row.epoch == best_epoch else ""
        logger.info(f"Epoch {row.epoch}: train loss = {row.train_loss:.6f}, validation accuracy = {row.val_acc:.4f}{marker}")


def log_influence_summary(profile):
    """
    Log the normalized average total influence per hop and the receptive field.

    Parameters:
    - profile (InfluenceProfile): Result of receptive_field.
    """
    logger.info(f"Influence over {profile.n_sampled} sampled nodes (seed {profile.seed}), "
                f"{profile.n_excluded} excluded:")
    for h, (total, normalized) in enumerate(zip(profile.T_bar, profile.T_bar_normalized)):
        logger.info(f"Hop {h}: T_bar = {total:.6e}, normalized = {normalized:.6f}")
    logger.info(f"Influence-weighted receptive field R = {profile.R:.4f}")


def log_stats_summary(report, name="graph"):
    """Log a network statistics report field by field."""
    logger.info(f"Network statistics of {name}:")
    for key, value in report.to_dict().items():
        logger.info(f"{key} = {value}")
