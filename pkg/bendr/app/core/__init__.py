""" Core library: tensors, ingest, preprocessing, model, pretraining and fine-tuning. """
